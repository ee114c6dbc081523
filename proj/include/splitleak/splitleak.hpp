// Copyright 2026 The splitleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "splitleak/attacks.hpp"
#include "splitleak/checkpoint.hpp"
#include "splitleak/data.hpp"
#include "splitleak/defenses.hpp"
#include "splitleak/experiment.hpp"
#include "splitleak/gemm.hpp"
#include "splitleak/layers.hpp"
#include "splitleak/loss.hpp"
#include "splitleak/metrics.hpp"
#include "splitleak/models.hpp"
#include "splitleak/optimizer.hpp"
#include "splitleak/pgm.hpp"
#include "splitleak/protocol.hpp"
#include "splitleak/rng.hpp"
#include "splitleak/svg.hpp"
#include "splitleak/tensor.hpp"
#include "splitleak/wire.hpp"
