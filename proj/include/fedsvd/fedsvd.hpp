// Copyright 2026 The fedsvd-sim Authors.
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

#ifndef FEDSVD_FEDSVD_HPP_
#define FEDSVD_FEDSVD_HPP_

#include "fedsvd/analysis.hpp"
#include "fedsvd/config.hpp"
#include "fedsvd/data.hpp"
#include "fedsvd/experiment.hpp"
#include "fedsvd/federation.hpp"
#include "fedsvd/linalg.hpp"
#include "fedsvd/lora.hpp"
#include "fedsvd/model.hpp"
#include "fedsvd/privacy.hpp"
#include "fedsvd/rng.hpp"
#include "fedsvd/verify.hpp"

#endif  // FEDSVD_FEDSVD_HPP_
