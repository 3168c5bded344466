#pragma once

#include <filesystem>
#include <vector>

#include "smoky/cascade.hpp"
#include "smoky/video.hpp"

namespace smoky {

/// Exit codes: 0 success, 1 validation/configuration error, 2 I/O error.
int run_cli(int argc, const char* const* argv);

/// Draws surviving pairs in green and stage-dropped detections in yellow;
/// writes frame_NNNNNN.ppm for every frame with at least one detection.
/// Returns the number of images written.
int render_overlays(const VideoSource& video, const std::vector<FrameVerdict>& verdicts,
                    const std::filesystem::path& out_dir);

}  // namespace smoky
