#include "aef/textures.hpp"

#include "aef/log.hpp"

#include <algorithm>
#include <cmath>

namespace aef {

namespace fs = std::filesystem;

static double lattice_value(uint64_t seed, int i, int j, int cells) {
  const int im = ((i % cells) + cells) % cells;
  const int jm = ((j % cells) + cells) % cells;
  uint64_t s = seed ^ (static_cast<uint64_t>(im) * 0x9e3779b97f4a7c15ULL) ^
               (static_cast<uint64_t>(jm) * 0xc2b2ae3d27d4eb4fULL);
  return static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
}

static double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

std::array<double, 3> TexNode::eval(double u, double v) const {
  switch (kind) {
    case Kind::sinusoid: {
      const double s = std::sin(2.0 * M_PI * (p[0] * u + p[1] * v) + p[2]);
      return {s, s, s};
    }
    case Kind::noise_lattice: {
      const int cells = std::max(1, static_cast<int>(p[0]));
      const double x = u * cells, y = v * cells;
      const double fx = std::floor(x), fy = std::floor(y);
      const int i = static_cast<int>(fx), j = static_cast<int>(fy);
      const double tx = smoothstep(x - fx), ty = smoothstep(y - fy);
      const double v00 = lattice_value(noise_seed, i, j, cells);
      const double v10 = lattice_value(noise_seed, i + 1, j, cells);
      const double v01 = lattice_value(noise_seed, i, j + 1, cells);
      const double v11 = lattice_value(noise_seed, i + 1, j + 1, cells);
      const double a = v00 + (v10 - v00) * tx;
      const double b = v01 + (v11 - v01) * tx;
      const double s = 2.0 * (a + (b - a) * ty) - 1.0;
      return {s, s, s};
    }
    case Kind::poly_warp: {
      const double du = p[0] * u * u + p[1] * u * v + p[2] * v * v;
      const double dv = p[3] * u * u + p[4] * u * v + p[5] * v * v;
      return kids[0].eval(u + du, v + dv);
    }
    case Kind::rotation: {
      const double c = std::cos(p[0]), s = std::sin(p[0]);
      const double x = u - 0.5, y = v - 0.5;
      return kids[0].eval(c * x - s * y + 0.5, s * x + c * y + 0.5);
    }
    case Kind::palette_map: {
      const auto t = kids[0].eval(u, v);
      std::array<double, 3> out{};
      for (int c = 0; c < 3; ++c) {
        const double tc = 0.5 + 0.5 * t[c];
        out[c] = std::cos(2.0 * M_PI * (p[0] * tc + chan[c]));
      }
      return out;
    }
    case Kind::blend: {
      const auto a = kids[0].eval(u, v);
      const auto b = kids[1].eval(u, v);
      std::array<double, 3> out{};
      if (kids.size() == 3) {
        const auto m = kids[2].eval(u, v);
        for (int c = 0; c < 3; ++c) {
          const double w = 0.5 + 0.5 * std::clamp(m[c], -1.0, 1.0);
          out[c] = w * a[c] + (1.0 - w) * b[c];
        }
      } else {
        for (int c = 0; c < 3; ++c) out[c] = p[0] * a[c] + (1.0 - p[0]) * b[c];
      }
      return out;
    }
  }
  return {0, 0, 0};
}

int TexNode::depth() const {
  int d = 0;
  for (const auto& k : kids) d = std::max(d, k.depth());
  return d + 1;
}

static TexNode sample_leaf(Rng& rng) {
  TexNode n;
  if (rng.bernoulli(0.5)) {
    n.kind = TexNode::Kind::sinusoid;
    n.p[0] = rng.uniform(-5.0, 5.0);
    n.p[1] = rng.uniform(-5.0, 5.0);
    n.p[2] = rng.uniform(0.0, 2.0 * M_PI);
  } else {
    n.kind = TexNode::Kind::noise_lattice;
    n.p[0] = rng.uniform_int(2, 10);
    n.noise_seed = rng.next_u64();
  }
  return n;
}

// Exact-depth construction: every child subtree has depth d-1.
static TexNode sample_node(Rng& rng, int d) {
  if (d <= 1) return sample_leaf(rng);
  TexNode n;
  const double pick = rng.uniform();
  if (pick < 0.25) {
    n.kind = TexNode::Kind::poly_warp;
    for (int i = 0; i < 6; ++i) n.p[i] = rng.uniform(-0.5, 0.5);
    n.kids.push_back(sample_node(rng, d - 1));
  } else if (pick < 0.45) {
    n.kind = TexNode::Kind::rotation;
    n.p[0] = rng.uniform(0.0, 2.0 * M_PI);
    n.kids.push_back(sample_node(rng, d - 1));
  } else if (pick < 0.70) {
    n.kind = TexNode::Kind::palette_map;
    n.p[0] = rng.uniform(0.5, 1.5);
    for (int c = 0; c < 3; ++c) n.chan[c] = rng.uniform();
    n.kids.push_back(sample_node(rng, d - 1));
  } else {
    n.kind = TexNode::Kind::blend;
    const bool masked = rng.bernoulli(0.5);
    n.p[0] = rng.uniform(0.2, 0.8);
    n.kids.push_back(sample_node(rng, d - 1));
    n.kids.push_back(sample_node(rng, d - 1));
    if (masked) n.kids.push_back(sample_node(rng, d - 1));
  }
  return n;
}

static void mark_per_channel(TexNode& n) {
  n.per_channel = n.kind == TexNode::Kind::palette_map;
  for (auto& k : n.kids) {
    mark_per_channel(k);
    n.per_channel = n.per_channel || k.per_channel;
  }
}

TextureProgram sample_program(Rng& rng, std::pair<int, int> depth_range) {
  if (depth_range.first < 2 || depth_range.second > 12 ||
      depth_range.first > depth_range.second)
    throw UserError("texture program depth range must lie within [2, 12]");
  const int d = rng.uniform_int(depth_range.first, depth_range.second);
  TextureProgram prog;
  // Root palette guarantees chromatic output; it occupies one depth level.
  prog.root.kind = TexNode::Kind::palette_map;
  prog.root.p[0] = rng.uniform(0.5, 1.5);
  for (int c = 0; c < 3; ++c) prog.root.chan[c] = rng.uniform();
  prog.root.kids.push_back(sample_node(rng, d - 1));
  mark_per_channel(prog.root);
  return prog;
}

// 2x2 supersampling keeps renders of the same program consistent across
// output resolutions.
cv::Mat render(const TextureProgram& p, int w, int h) {
  if (w < 32 || h < 32) throw UserError("render: minimum side is 32");
  static constexpr double kOffsets[2] = {0.25, 0.75};
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      std::array<double, 3> acc{};
      for (double oy : kOffsets)
        for (double ox : kOffsets) {
          const auto val = p.root.eval((x + ox) / w, (y + oy) / h);
          for (int c = 0; c < 3; ++c) acc[c] += val[c];
        }
      for (int c = 0; c < 3; ++c) {
        const double t = std::clamp(0.5 + 0.5 * acc[c] / 4.0, 0.0, 1.0);
        row[x][2 - c] = static_cast<uint8_t>(std::lround(255.0 * t));
      }
    }
  }
  return img;
}

bool is_near_constant(const cv::Mat& img) {
  cv::Scalar mean, stddev;
  cv::meanStdDev(img, mean, stddev);
  return std::max({stddev[0], stddev[1], stddev[2]}) < 0.5;
}

DatasetManifest generate_texture_dataset(const TextureDatasetOptions& opt,
                                         const fs::path& out_root) {
  if (opt.n < 1) throw UserError("gen-textures: n must be >= 1");
  fs::create_directories(out_root);

  DatasetManifest m;
  m.root = out_root;
  m.meta["source_tag"] = opt.source_tag;
  m.meta["generator"] = "texture-program";
  m.meta["seed"] = std::to_string(opt.seed);

  Rng base(opt.seed);
  const int digits = static_cast<int>(std::to_string(opt.n - 1).size());
  for (int i = 0; i < opt.n; ++i) {
    Rng rng = base.derive("texture", static_cast<uint64_t>(i));
    cv::Mat img;
    bool ok = false;
    for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
      TextureProgram prog = sample_program(rng, opt.depth_range);
      img = render(prog, opt.side, opt.side);
      ok = !is_near_constant(img);
    }
    if (!ok) throw std::runtime_error(cat("texture ", i, ": 10 constant renders"));

    std::string name = std::to_string(i);
    name.insert(0, static_cast<size_t>(digits) - name.size(), '0');
    const std::string rel = "tex_" + name + ".jpg";
    const int quality = rng.uniform_int(opt.jpeg_quality_lo, opt.jpeg_quality_hi);
    save_image(out_root / rel, img, ContainerFormat::jpeg, quality);

    ImageRecord r;
    r.id = rel;
    r.path = rel;
    r.width_px = opt.side;
    r.height_px = opt.side;
    r.container_format = ContainerFormat::jpeg;
    r.label = Label::real;
    r.source_tag = opt.source_tag;
    r.content_hash = sha256_file(out_root / rel);
    m.records.push_back(std::move(r));
  }
  return m;
}

}  // namespace aef
