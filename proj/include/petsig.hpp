// Copyright 2026 the petsig authors
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

#include "petsig/cli.hpp"
#include "petsig/conflicts.hpp"
#include "petsig/csv.hpp"
#include "petsig/digest.hpp"
#include "petsig/errors.hpp"
#include "petsig/features.hpp"
#include "petsig/geometry.hpp"
#include "petsig/halton.hpp"
#include "petsig/mathutil.hpp"
#include "petsig/ordered_logit.hpp"
#include "petsig/parallel.hpp"
#include "petsig/rng.hpp"
#include "petsig/rplogit.hpp"
#include "petsig/signals.hpp"
#include "petsig/trajectory.hpp"
#include "petsig/util.hpp"
