#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "edgecap/image.hpp"

namespace edgecap {

// Binary NetPBM: P5 (grayscale) and P6 (RGB), maxval 255 only. Samples are
// scaled to [0, 1] on load and rounded back to bytes on save.
Image load_netpbm(std::span<const std::uint8_t> bytes);
Image load_netpbm_file(const std::filesystem::path& path);

// P5 for 1-channel images, P6 for 3-channel.
std::vector<std::uint8_t> encode_netpbm(const Image& img);
void save_netpbm_file(const Image& img, const std::filesystem::path& path);

}  // namespace edgecap
