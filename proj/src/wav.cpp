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

#include "sedlab/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "binary_io.h"

namespace sedlab {

namespace {

void write_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

std::uint16_t u16_at(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t u32_at(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

}  // namespace

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  std::vector<char> pcm(clip.samples.size() * 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const double s = std::clamp(static_cast<double>(clip.samples[i]), -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(s * 32767.0));
    const auto u = static_cast<std::uint16_t>(q);
    pcm[2 * i] = static_cast<char>(u & 0xff);
    pcm[2 * i + 1] = static_cast<char>(u >> 8);
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(pcm.size());
  os.write("RIFF", 4);
  binary::write_u32(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  binary::write_u32(os, 16);
  write_u16(os, 1);  // PCM
  write_u16(os, 1);  // mono
  binary::write_u32(os, static_cast<std::uint32_t>(clip.sample_rate));
  binary::write_u32(os, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  write_u16(os, 2);
  write_u16(os, 16);
  os.write("data", 4);
  binary::write_u32(os, data_bytes);
  os.write(pcm.data(), static_cast<std::streamsize>(pcm.size()));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) -> AudioClip {
    throw std::runtime_error(path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE") {
    return fail("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  AudioClip clip;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
    const std::size_t size = u32_at(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) return fail("truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (size < 16) return fail("short fmt chunk");
      const auto format = u16_at(&bytes[body]);
      const auto channels = u16_at(&bytes[body + 2]);
      const auto bits = u16_at(&bytes[body + 14]);
      if (format != 1 || channels != 1 || bits != 16) {
        return fail("only 16-bit PCM mono is supported");
      }
      clip.sample_rate = static_cast<int>(u32_at(&bytes[body + 4]));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) return fail("data chunk before fmt chunk");
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(u16_at(&bytes[body + 2 * i]));
        clip.samples[i] = static_cast<float>(v) / 32767.0f;
      }
      return clip;
    }
    pos = body + size + (size & 1);
  }
  return fail("no data chunk");
}

}  // namespace sedlab
