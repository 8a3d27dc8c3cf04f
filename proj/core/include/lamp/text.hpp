/*
 * Copyright 2026 The lamp-audit Authors.
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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lamp {

// Case-folded, trimmed, internal whitespace collapsed, trailing . , ; : ! ?
// removed. Two factor texts are duplicates iff their normal forms match.
std::string normalize_factor(std::string_view text);

std::string trim(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

// The first balanced top-level {...} in `s`, skipping braces inside JSON
// string literals. Leading prose and code fences are ignored.
std::optional<std::string_view> extract_json_object(std::string_view s);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

// SplitMix64 finalizer, used to derive independent seeds from a base seed.
std::uint64_t mix_seed(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

}  // namespace lamp
