// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "scalestory/commands.hpp"
#include "scalestory/config.hpp"
#include "scalestory/errors.hpp"
#include "scalestory/guidance.hpp"
#include "scalestory/image.hpp"
#include "scalestory/metrics.hpp"
#include "scalestory/orchestrator.hpp"
#include "scalestory/prompt.hpp"
#include "scalestory/random.hpp"
#include "scalestory/scalewise.hpp"
#include "scalestory/tensor.hpp"
#include "scalestory/transformer.hpp"
