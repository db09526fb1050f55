// Copyright (c) 2026 spdcsim contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace spdcsim {

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr long double pi_l = 3.141592653589793238462643383279502884L;

inline constexpr std::string_view library_version = "0.1.0";

/// On-disk format revisions, bumped only on layout changes.
inline constexpr std::string_view format_complex_field = "BPF1";
inline constexpr std::string_view format_real_field = "BPR1";
inline constexpr std::string_view format_frame_stack = "BPB1";

}  // namespace spdcsim
