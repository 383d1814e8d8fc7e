#include "aef/textures.hpp"

#include "aef/manifest.hpp"

#include <doctest.h>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <filesystem>

using namespace aef;
namespace fs = std::filesystem;

TEST_CASE("sample_program: determinism and exact depth") {
  Rng a(5), b(5);
  TextureProgram p1 = sample_program(a, {3, 6});
  TextureProgram p2 = sample_program(b, {3, 6});
  cv::Mat r1 = render(p1, 64, 64);
  cv::Mat r2 = render(p2, 64, 64);
  CHECK(cv::norm(r1, r2, cv::NORM_INF) == 0.0);

  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    TextureProgram p = sample_program(rng, {2, 2});
    CHECK(p.root.depth() == 2);
  }
  Rng rng(1);
  CHECK_THROWS(sample_program(rng, {1, 3}));
  CHECK_THROWS(sample_program(rng, {2, 13}));
}

TEST_CASE("render: byte determinism and closed-form pixel") {
  Rng rng(11);
  TextureProgram p = sample_program(rng, {3, 5});
  cv::Mat a = render(p, 96, 64);
  cv::Mat b = render(p, 96, 64);
  CHECK(cv::norm(a, b, cv::NORM_INF) == 0.0);
  CHECK(a.cols == 96);
  CHECK(a.rows == 64);
  CHECK_THROWS(render(p, 16, 64));

  // depth-2 program built by hand: palette over one sinusoid
  TextureProgram manual;
  manual.root.kind = TexNode::Kind::palette_map;
  manual.root.p[0] = 1.0;
  manual.root.chan = {0.0, 0.25, 0.5};
  TexNode leaf;
  leaf.kind = TexNode::Kind::sinusoid;
  leaf.p = {2.0, 1.0, 0.5, 0, 0, 0};
  manual.root.kids.push_back(leaf);

  const int w = 64, h = 64;
  cv::Mat img = render(manual, w, h);
  // pixel (0,0) averages the renderer's four sample offsets
  for (int c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (double oy : {0.25, 0.75})
      for (double ox : {0.25, 0.75}) {
        const double s =
            std::sin(2.0 * M_PI * (2.0 * ox / w + 1.0 * oy / h) + 0.5);
        const double tc = 0.5 + 0.5 * s;
        acc += std::cos(2.0 * M_PI * (1.0 * tc + manual.root.chan[c]));
      }
    const uint8_t expect = static_cast<uint8_t>(
        std::lround(255.0 * std::clamp(0.5 + 0.5 * acc / 4.0, 0.0, 1.0)));
    CHECK(img.at<cv::Vec3b>(0, 0)[2 - c] == expect);
  }
}

TEST_CASE("render: non-constant rate over a program population") {
  Rng rng(23);
  int constant = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    Rng r = rng.derive("pop", i);
    TextureProgram p = sample_program(r, {3, 6});
    cv::Mat img = render(p, 48, 48);
    constant += is_near_constant(img);
  }
  CHECK(n - constant >= 990);
}

TEST_CASE("render: the same field at two resolutions correlates") {
  Rng rng(31);
  int checked = 0;
  double corr_sum = 0.0;
  for (int i = 0; i < 5; ++i) {
    Rng r = rng.derive("scale", i);
    TextureProgram p = sample_program(r, {3, 5});
    cv::Mat small = render(p, 128, 128);
    cv::Mat large = render(p, 384, 384);
    if (is_near_constant(small)) continue;
    cv::Mat shrunk;
    cv::resize(large, shrunk, cv::Size(128, 128), 0, 0, cv::INTER_AREA);
    cv::Mat a, b;
    small.convertTo(a, CV_32F);
    shrunk.convertTo(b, CV_32F);
    cv::Scalar ma, sa, mb, sb;
    cv::meanStdDev(a, ma, sa);
    cv::meanStdDev(b, mb, sb);
    cv::Mat an = a - cv::Scalar(ma[0], ma[1], ma[2]);
    cv::Mat bn = b - cv::Scalar(mb[0], mb[1], mb[2]);
    const double corr =
        an.dot(bn) / (std::sqrt(an.dot(an)) * std::sqrt(bn.dot(bn)));
    corr_sum += corr;
    ++checked;
    CHECK(corr > 0.9);
  }
  CHECK(checked >= 3);
}

TEST_CASE("generate_texture_dataset: manifest passes verification, reproducible") {
  const fs::path root =
      fs::temp_directory_path() / ("aef_tex_" + std::to_string(::getpid()));
  fs::remove_all(root);

  TextureDatasetOptions opt;
  opt.n = 10;
  opt.side = 48;
  opt.seed = 77;
  DatasetManifest m = generate_texture_dataset(opt, root / "a");
  REQUIRE(m.records.size() == 10);
  CHECK(verify_manifest(m).empty());
  for (const auto& r : m.records) {
    CHECK(r.label == Label::real);
    CHECK(r.source_tag == "procedural");
    CHECK(r.container_format == ContainerFormat::jpeg);
    CHECK(r.width_px == 48);
  }

  DatasetManifest m2 = generate_texture_dataset(opt, root / "b");
  for (size_t i = 0; i < m.records.size(); ++i)
    CHECK(m.records[i].content_hash == m2.records[i].content_hash);

  // non-degeneracy: every image has positive pixel stddev
  for (const auto& r : m.records) {
    cv::Mat img = load_image(m.abs_path(r));
    cv::Scalar mean, stddev;
    cv::meanStdDev(img, mean, stddev);
    CHECK(std::max({stddev[0], stddev[1], stddev[2]}) > 0.0);
  }
  fs::remove_all(root);
}
