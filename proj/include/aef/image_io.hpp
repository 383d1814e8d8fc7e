#pragma once

#include <opencv2/core.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aef {

enum class ContainerFormat { png, jpeg, webp };

std::string to_string(ContainerFormat f);
std::optional<ContainerFormat> container_from_string(const std::string& s);

// Sniffs magic bytes; extension alone is not trusted.
std::optional<ContainerFormat> sniff_container(const std::filesystem::path& p);
bool has_image_extension(const std::filesystem::path& p);

// Decodes to 8-bit BGR. Returns empty Mat on failure. EXIF orientation is
// ignored so dimensions always match the stored pixel grid.
cv::Mat load_image(const std::filesystem::path& p);

// quality applies to jpeg/webp; png is lossless.
void save_image(const std::filesystem::path& p, const cv::Mat& img,
                ContainerFormat fmt, int quality = 95);

std::vector<uint8_t> encode_image(const cv::Mat& img, ContainerFormat fmt,
                                  int quality = 95);
cv::Mat decode_image(const std::vector<uint8_t>& bytes);

std::string sha256_hex(const std::vector<uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& p);

}  // namespace aef
