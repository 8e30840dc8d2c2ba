#pragma once

#include <filesystem>
#include <string>

#include "sca/tensor.hpp"

namespace sca {

// Grayscale PFM ("Pf"), float32, rows stored bottom to top. Written
// little-endian (scale -1.0); a positive scale on read means big-endian.
void write_pfm(const Tensor& map, const std::filesystem::path& path);
Tensor read_pfm(const std::filesystem::path& path);
std::string encode_pfm(const Tensor& map);
Tensor decode_pfm(const std::string& bytes);

// Binary P6, maxval 255; [0,1] <-> [0,255] with round-half-up.
void write_ppm(const Tensor& image, const std::filesystem::path& path);
Tensor read_ppm(const std::filesystem::path& path);
std::string encode_ppm(const Tensor& image);
Tensor decode_ppm(const std::string& bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace sca
