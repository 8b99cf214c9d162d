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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace plasmodium {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;

/// 64-bit FNV-1a; `state` chains successive calls.
std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t state = kFnvOffsetBasis) noexcept;
std::uint64_t fnv1a64(std::string_view text, std::uint64_t state = kFnvOffsetBasis) noexcept;
std::uint64_t fnv1a64(std::span<const float> values, std::uint64_t state = kFnvOffsetBasis) noexcept;

/// 16 lowercase hex digits.
std::string to_hex(std::uint64_t value);

}  // namespace plasmodium
