// Copyright 2026 The OTCD Authors
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

#include "otcd/affinity.hpp"
#include "otcd/association.hpp"
#include "otcd/engine.hpp"
#include "otcd/lifecycle.hpp"
#include "otcd/metrics.hpp"
#include "otcd/model.hpp"
#include "otcd/motion.hpp"
#include "otcd/stream.hpp"
#include "otcd/stream_io.hpp"
