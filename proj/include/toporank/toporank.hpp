// Copyright 2026 The toporank Authors.
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

#include "toporank/container.hpp"
#include "toporank/core_types.hpp"
#include "toporank/dataset.hpp"
#include "toporank/detector.hpp"
#include "toporank/error.hpp"
#include "toporank/experiment.hpp"
#include "toporank/lab/adaptive_loss.hpp"
#include "toporank/lab/backdoor.hpp"
#include "toporank/lab/emit.hpp"
#include "toporank/lab/model_io.hpp"
#include "toporank/lab/train.hpp"
#include "toporank/lab/trigger.hpp"
#include "toporank/metrics.hpp"
#include "toporank/nn/network.hpp"
#include "toporank/topo.hpp"
#include "toporank/trace_io.hpp"
