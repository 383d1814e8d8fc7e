#include "aef/image_io.hpp"

#include "aef/log.hpp"

#include <opencv2/imgcodecs.hpp>

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>

namespace aef {

namespace fs = std::filesystem;

std::string to_string(ContainerFormat f) {
  switch (f) {
    case ContainerFormat::png: return "png";
    case ContainerFormat::jpeg: return "jpeg";
    case ContainerFormat::webp: return "webp";
  }
  return "png";
}

std::optional<ContainerFormat> container_from_string(const std::string& s) {
  if (s == "png") return ContainerFormat::png;
  if (s == "jpeg" || s == "jpg") return ContainerFormat::jpeg;
  if (s == "webp") return ContainerFormat::webp;
  return std::nullopt;
}

std::optional<ContainerFormat> sniff_container(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::array<uint8_t, 12> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  if (in.gcount() < 12) return std::nullopt;
  if (head[0] == 0x89 && head[1] == 'P' && head[2] == 'N' && head[3] == 'G')
    return ContainerFormat::png;
  if (head[0] == 0xff && head[1] == 0xd8) return ContainerFormat::jpeg;
  if (head[0] == 'R' && head[1] == 'I' && head[2] == 'F' && head[3] == 'F' &&
      head[8] == 'W' && head[9] == 'E' && head[10] == 'B' && head[11] == 'P')
    return ContainerFormat::webp;
  return std::nullopt;
}

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".webp";
}

cv::Mat load_image(const fs::path& p) {
  return cv::imread(p.string(), cv::IMREAD_COLOR | cv::IMREAD_IGNORE_ORIENTATION);
}

static std::vector<int> encode_flags(ContainerFormat fmt, int quality) {
  switch (fmt) {
    case ContainerFormat::jpeg:
      return {cv::IMWRITE_JPEG_QUALITY, quality};
    case ContainerFormat::webp:
      return {cv::IMWRITE_WEBP_QUALITY, quality};
    case ContainerFormat::png:
      return {cv::IMWRITE_PNG_COMPRESSION, 6};
  }
  return {};
}

static const char* encode_ext(ContainerFormat fmt) {
  switch (fmt) {
    case ContainerFormat::jpeg: return ".jpg";
    case ContainerFormat::webp: return ".webp";
    case ContainerFormat::png: return ".png";
  }
  return ".png";
}

std::vector<uint8_t> encode_image(const cv::Mat& img, ContainerFormat fmt,
                                  int quality) {
  std::vector<uint8_t> buf;
  if (!cv::imencode(encode_ext(fmt), img, buf, encode_flags(fmt, quality)))
    throw std::runtime_error(cat("image encode failed (", to_string(fmt), ")"));
  return buf;
}

cv::Mat decode_image(const std::vector<uint8_t>& bytes) {
  return cv::imdecode(bytes, cv::IMREAD_COLOR | cv::IMREAD_IGNORE_ORIENTATION);
}

void save_image(const fs::path& p, const cv::Mat& img, ContainerFormat fmt,
                int quality) {
  auto buf = encode_image(img, fmt, quality);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(cat("cannot open for write: ", p.string()));
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error(cat("short write: ", p.string()));
}

std::string sha256_hex(const std::vector<uint8_t>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error(cat("cannot read: ", p.string()));
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

}  // namespace aef
