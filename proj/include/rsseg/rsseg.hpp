// Copyright 2026 The rsseg Authors.
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

#include "rsseg/backend.hpp"
#include "rsseg/config.hpp"
#include "rsseg/core.hpp"
#include "rsseg/formats.hpp"
#include "rsseg/labelmap.hpp"
#include "rsseg/merge.hpp"
#include "rsseg/metrics.hpp"
#include "rsseg/morphology.hpp"
#include "rsseg/multipass.hpp"
#include "rsseg/pipeline.hpp"
#include "rsseg/render.hpp"
#include "rsseg/rle.hpp"
#include "rsseg/synthetic.hpp"
#include "rsseg/tiler.hpp"
#include "rsseg/union_find.hpp"
#include "rsseg/wire.hpp"
