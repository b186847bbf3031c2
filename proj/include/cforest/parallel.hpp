#pragma once

namespace cforest {

/// 0 (or negative) means "all available"; otherwise the requested count.
int resolve_threads(int requested) noexcept;

int max_threads() noexcept;

}  // namespace cforest
