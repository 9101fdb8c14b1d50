// Copyright 2026 The MBNAS Authors
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

#ifndef MBNAS_MBNAS_HPP_
#define MBNAS_MBNAS_HPP_

#include "mbnas/common.hpp"
#include "mbnas/search_space.hpp"
#include "mbnas/arch_compiler.hpp"
#include "mbnas/evaluation.hpp"
#include "mbnas/worker_client.hpp"
#include "mbnas/search_engine.hpp"
#include "mbnas/seg_metrics.hpp"
#include "mbnas/stats.hpp"
#include "mbnas/mask_io.hpp"

#endif  // MBNAS_MBNAS_HPP_
