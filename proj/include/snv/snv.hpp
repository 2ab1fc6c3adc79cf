// Copyright 2026 The SNV Authors.
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

#ifndef SNV_SNV_HPP
#define SNV_SNV_HPP

#include "snv/artifacts.hpp"
#include "snv/coalition.hpp"
#include "snv/config.hpp"
#include "snv/continual.hpp"
#include "snv/error.hpp"
#include "snv/estimator.hpp"
#include "snv/game.hpp"
#include "snv/mask.hpp"
#include "snv/metrics.hpp"
#include "snv/network.hpp"
#include "snv/parallel.hpp"
#include "snv/rng.hpp"
#include "snv/stats.hpp"
#include "snv/tasks.hpp"

#endif  // SNV_SNV_HPP
