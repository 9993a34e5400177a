#pragma once

#include <string>

#include "sf/dataset.hpp"

namespace sf {

struct VisualizeOptions {
    std::string dataset_dir;
    std::string checkpoint;  // optional; adds prediction and error maps
    int frame = 0;           // global frame index
    std::string out_dir;
};

// Writes image.png, depth_gt.png, sparse.png overlays for one frame, plus
// topology/refined predictions and error maps when a checkpoint is given.
void visualize_frame(const VisualizeOptions& options);

}  // namespace sf
