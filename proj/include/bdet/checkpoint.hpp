#pragma once

#include <string>

#include "bdet/config.hpp"
#include "bdet/detector.hpp"
#include "bdet/io.hpp"

namespace bdet {

void save_head_checkpoint(HeadParams<float>& params, const Config& cfg,
                          const std::string& path);

// Rebuilds the head from a checkpoint. Model-structure fields come from the
// checkpoint's meta entry; pipeline settings (thresholds etc.) come from
// `base`, when given.
std::pair<HeadParams<float>, Config> load_head_checkpoint(
    const std::string& path, const Config* base = nullptr);

}  // namespace bdet
