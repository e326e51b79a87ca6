// Copyright 2026 The SeCoST Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "secost/adam.hpp"
#include "secost/config.hpp"
#include "secost/dataset.hpp"
#include "secost/error.hpp"
#include "secost/featurize.hpp"
#include "secost/io.hpp"
#include "secost/logmel.hpp"
#include "secost/metrics.hpp"
#include "secost/mixing.hpp"
#include "secost/nn.hpp"
#include "secost/orchestrator.hpp"
#include "secost/rng.hpp"
#include "secost/soft_targets.hpp"
#include "secost/synth.hpp"
#include "secost/tensor.hpp"
#include "secost/trainer.hpp"
#include "secost/verify.hpp"
#include "secost/wav.hpp"
#include "secost/wels.hpp"
