// Copyright 2026 The Hydra Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef HYDRA_HYDRA_HPP_
#define HYDRA_HYDRA_HPP_

#include "hydra/effects.hpp"
#include "hydra/error.hpp"
#include "hydra/harness/dataset.hpp"
#include "hydra/harness/plots.hpp"
#include "hydra/harness/report_io.hpp"
#include "hydra/harness/run_config.hpp"
#include "hydra/harness/svg.hpp"
#include "hydra/harness/vocab.hpp"
#include "hydra/intervene.hpp"
#include "hydra/io.hpp"
#include "hydra/linalg.hpp"
#include "hydra/model.hpp"
#include "hydra/motifs.hpp"
#include "hydra/stats.hpp"
#include "hydra/weights_io.hpp"

#endif  // HYDRA_HYDRA_HPP_
