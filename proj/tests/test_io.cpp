#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "mondepth/checkpoint.hpp"
#include "mondepth/errors.hpp"
#include "mondepth/io.hpp"
#include "mondepth/rng.hpp"
#include "mondepth/toy_model.hpp"

using namespace mondepth;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("mondepth_io_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string p(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(IoTest, PfmRoundTripBitExact) {
  Rng rng(11);
  ScalarGrid g(7, 5);
  for (double& v : g.data) v = float(rng.next_range(-100, 100));
  write_pfm(p("a.pfm"), g);
  ScalarGrid back = read_pfm(p("a.pfm"));
  ASSERT_EQ(back.width, 7);
  ASSERT_EQ(back.height, 5);
  EXPECT_EQ(back.data, g.data);
}

TEST_F(IoTest, PfmHeaderIsStandard) {
  ScalarGrid g(2, 2, 1.0);
  write_pfm(p("h.pfm"), g);
  std::ifstream in(p("h.pfm"), std::ios::binary);
  std::string magic;
  int w, h;
  double scale;
  in >> magic >> w >> h >> scale;
  EXPECT_EQ(magic, "Pf");
  EXPECT_EQ(w, 2);
  EXPECT_EQ(h, 2);
  EXPECT_LT(scale, 0.0);
}

TEST_F(IoTest, Pfm3RoundTrip) {
  Rng rng(12);
  ImageGrid img(4, 3, 3);
  for (auto& ch : img.channels)
    for (double& v : ch.data) v = float(rng.next_unit());
  write_pfm3(p("c.pfm"), img);
  ImageGrid back = read_pfm3(p("c.pfm"));
  ASSERT_EQ(back.channel_count(), 3);
  for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(back.channels[ch].data, img.channels[ch].data);
}

TEST_F(IoTest, NormalsPfmRoundTrip) {
  NormalGrid n(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      n.x.at(r, c) = 0.0;
      n.y.at(r, c) = float(0.6);
      n.z.at(r, c) = float(-0.8);
    }
  write_pfm_normals(p("n.pfm"), n);
  NormalGrid back = read_pfm_normals(p("n.pfm"));
  EXPECT_EQ(back.y.data, n.y.data);
  EXPECT_EQ(back.z.data, n.z.data);
}

TEST_F(IoTest, PfmMissingFileThrows) {
  EXPECT_THROW(read_pfm(p("absent.pfm")), io_error);
}

TEST_F(IoTest, PfmTruncatedPayloadThrows) {
  ScalarGrid g(8, 8, 1.0);
  write_pfm(p("t.pfm"), g);
  fs::resize_file(p("t.pfm"), fs::file_size(p("t.pfm")) / 2);
  EXPECT_THROW(read_pfm(p("t.pfm")), io_error);
}

TEST_F(IoTest, PngGray16RoundTripQuantized) {
  ScalarGrid g(5, 4);
  for (size_t i = 0; i < g.data.size(); ++i) g.data[i] = double(i) * 0.25;
  write_png_gray16(p("g.png"), g, 0.25);
  ScalarGrid back = read_png_gray(p("g.png"), 0.25);
  for (size_t i = 0; i < g.data.size(); ++i) EXPECT_NEAR(back.data[i], g.data[i], 1e-9);
}

TEST_F(IoTest, PngMaskRoundTrip) {
  ValidMask m(6, 3, true);
  m.set(0, 0, false);
  m.set(2, 5, false);
  write_png_mask(p("m.png"), m);
  ValidMask back = read_png_mask(p("m.png"));
  EXPECT_EQ(back.flags, m.flags);
}

TEST_F(IoTest, PngRgbRoundTrip8Bit) {
  ImageGrid img(3, 2, 3);
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) img.at(ch, r, c) = (ch + r + c) / 6.0;
  write_png_rgb(p("rgb.png"), img);
  ImageGrid back = read_png_rgb(p("rgb.png"));
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(back.at(ch, r, c), img.at(ch, r, c), 1.0 / 255.0);
}

TEST_F(IoTest, PlyHeaderAndVertexCount) {
  PointCloud cloud;
  cloud.points = {{0, 0, 1}, {1, 0, 2}, {0, 1, 3}};
  write_ply(p("c.ply"), cloud);
  std::ifstream in(p("c.ply"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "ply");
  int vertices = 0;
  bool in_header = true;
  int data_lines = 0;
  while (std::getline(in, line)) {
    if (in_header && line.rfind("element vertex", 0) == 0)
      vertices = std::stoi(line.substr(15));
    if (line == "end_header") {
      in_header = false;
      continue;
    }
    if (!in_header && !line.empty()) ++data_lines;
  }
  EXPECT_EQ(vertices, 3);
  EXPECT_EQ(data_lines, 3);
}

TEST_F(IoTest, CheckpointRoundTrip) {
  Checkpoint ckpt;
  ckpt.config = {{"recipe", "ssi"}, {"seed", 7}};
  ckpt.blobs.push_back({"layer0.w", {1.0, -2.5, 3.25}});
  ckpt.blobs.push_back({"layer0.b", {0.0}});
  write_checkpoint(p("a.ckpt"), ckpt);
  Checkpoint back = read_checkpoint(p("a.ckpt"));
  EXPECT_EQ(back.config["recipe"], "ssi");
  ASSERT_EQ(back.blobs.size(), 2u);
  EXPECT_EQ(back.blobs[0].first, "layer0.w");
  EXPECT_EQ(back.blobs[0].second, ckpt.blobs[0].second);
}

TEST_F(IoTest, CheckpointWriteIsDeterministic) {
  Checkpoint ckpt;
  ckpt.config = {{"a", 1}};
  ckpt.blobs.push_back({"w", {0.5, 0.25}});
  write_checkpoint(p("d1.ckpt"), ckpt);
  write_checkpoint(p("d2.ckpt"), ckpt);
  std::ifstream f1(p("d1.ckpt"), std::ios::binary), f2(p("d2.ckpt"), std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  EXPECT_EQ(s1, s2);
}

TEST_F(IoTest, CheckpointBadMagicThrows) {
  std::ofstream out(p("bad.ckpt"), std::ios::binary);
  out << "NOPE0000000000000000";
  out.close();
  EXPECT_THROW(read_checkpoint(p("bad.ckpt")), io_error);
}

TEST_F(IoTest, CheckpointNetRoundTrip) {
  ToyNet net = make_toy_net(3, {4, 1}, 21);
  Checkpoint ckpt = checkpoint_from_net(net, {{"recipe", "ssi"}});
  write_checkpoint(p("net.ckpt"), ckpt);
  ToyNet back = net_from_checkpoint(read_checkpoint(p("net.ckpt")));
  ASSERT_EQ(back.layers.size(), net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    EXPECT_EQ(back.layers[i].w, net.layers[i].w);
    EXPECT_EQ(back.layers[i].b, net.layers[i].b);
  }
}

TEST_F(IoTest, CheckpointNetMismatchedBlobThrows) {
  ToyNet net = make_toy_net(3, {4, 1}, 21);
  Checkpoint ckpt = checkpoint_from_net(net, {});
  ckpt.blobs[0].second.pop_back();
  EXPECT_THROW(net_from_checkpoint(ckpt), io_error);
}
