// Copyright (c) 2026 The snapmix-cpp Authors. All Rights Reserved.
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

#include "snapmix/cam.hpp"
#include "snapmix/checkpoint.hpp"
#include "snapmix/config.hpp"
#include "snapmix/datagen.hpp"
#include "snapmix/harness.hpp"
#include "snapmix/image.hpp"
#include "snapmix/image_io.hpp"
#include "snapmix/mix.hpp"
#include "snapmix/model.hpp"
#include "snapmix/preview.hpp"
#include "snapmix/random.hpp"
#include "snapmix/resize.hpp"
#include "snapmix/spm.hpp"
