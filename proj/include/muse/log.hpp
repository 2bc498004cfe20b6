#pragma once

#include <functional>
#include <string>

namespace muse {

using WarningSink = std::function<void(const std::string&)>;

// Emits a library warning. Defaults to stderr.
void warn(const std::string& message);

// Replaces the warning sink and returns the previous one. Intended for
// tests and for front ends that collect diagnostics.
WarningSink set_warning_sink(WarningSink sink);

} // namespace muse
