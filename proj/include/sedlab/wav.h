/*
 * Copyright 2026 The sedlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// 16-bit PCM mono WAV reading and writing.

#ifndef SEDLAB_WAV_H_
#define SEDLAB_WAV_H_

#include <filesystem>

#include "sedlab/features.h"

namespace sedlab {

// Samples are clipped to [-1, 1] and rounded to the nearest 16-bit level.
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

// Accepts only uncompressed 16-bit mono files. Unknown chunks are skipped.
AudioClip read_wav(const std::filesystem::path& path);

}  // namespace sedlab

#endif  // SEDLAB_WAV_H_
