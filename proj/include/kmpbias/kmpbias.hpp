// Copyright 2026 The kmpbias Authors
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

#include "kmpbias/batch_engine.hpp"
#include "kmpbias/beam_search.hpp"
#include "kmpbias/bias_scorer.hpp"
#include "kmpbias/channel.hpp"
#include "kmpbias/engine.hpp"
#include "kmpbias/error.hpp"
#include "kmpbias/kmp.hpp"
#include "kmpbias/metrics.hpp"
#include "kmpbias/prefix_scorer.hpp"
#include "kmpbias/sweep.hpp"
#include "kmpbias/testset.hpp"
#include "kmpbias/text_io.hpp"
