/**
 * Copyright 2026 The Plasmodium Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "plasmodium/checksum.hpp"

#include <fmt/format.h>

namespace plasmodium {

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t state) noexcept {
  constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  for (std::byte b : bytes) {
    state ^= static_cast<std::uint64_t>(b);
    state *= kPrime;
  }
  return state;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t state) noexcept {
  return fnv1a64(std::as_bytes(std::span(text.data(), text.size())), state);
}

std::uint64_t fnv1a64(std::span<const float> values, std::uint64_t state) noexcept {
  return fnv1a64(std::as_bytes(values), state);
}

std::string to_hex(std::uint64_t value) { return fmt::format("{:016x}", value); }

}  // namespace plasmodium
