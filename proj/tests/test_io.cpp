#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "dectlab/error.hpp"
#include "dectlab/io.hpp"
#include "dectlab/phantom.hpp"

using namespace dectlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("dectlab_io_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string what_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

void put(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

}  // namespace

TEST_SUITE("io") {

TEST_CASE("float32 little-endian encoding") {
  const std::vector<float> v{1.0f, -2.5f};
  const std::string bytes = io::float32_bytes(v);
  REQUIRE(bytes.size() == 8);
  CHECK(static_cast<unsigned char>(bytes[3]) == 0x3f);
  CHECK(static_cast<unsigned char>(bytes[2]) == 0x80);
  CHECK(io::parse_float32(bytes) == v);
  CHECK_THROWS_AS(io::parse_float32("abc"), Error);
}

TEST_CASE("image round trip") {
  TempDir d;
  MonoImage img(5, 3, 80.0, 20.0, 80.0);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = 0.1 * static_cast<double>(i) - 0.3;
  io::save_image(d / "img", img);
  CHECK(fs::exists(d / "img.raw"));
  CHECK(fs::file_size(d / "img.raw") == 60);
  const MonoImage back = io::load_image(d / "img");
  CHECK(back.width() == 5);
  CHECK(back.height() == 3);
  CHECK(back.energy_kev == 80.0);
  CHECK(back.dose_cc == 20.0);
  CHECK(back.reference_cc == 80.0);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(back[i] == static_cast<double>(static_cast<float>(img[i])));
  const auto meta = nlohmann::json::parse(io::read_file(d / "img.json"));
  CHECK(meta.at("dose_scale").get<double>() == 0.25);
}

TEST_CASE("fraction map round trip") {
  TempDir d;
  PhantomSpec s;
  s.width = 20;
  s.height = 16;
  s.vessels.push_back({8, 8, 3, 0.05});
  BoneSpec b;
  b.shape = BoneSpec::Shape::rect;
  b.x0 = 12;
  b.y0 = 2;
  b.x1 = 18;
  b.y1 = 10;
  b.bone_fraction = 0.4;
  s.bones.push_back(b);
  const FractionMap m = generate_phantom(s);
  io::save_fraction_map(d / "frac", m);
  CHECK(fs::file_size(d / "frac.raw") == 3 * 4 * m.size());
  const FractionMap back = io::load_fraction_map(d / "frac");
  REQUIRE(back.same_shape(m));
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(back[i].water == static_cast<double>(static_cast<float>(m[i].water)));
    CHECK(back[i].bone == static_cast<double>(static_cast<float>(m[i].bone)));
    CHECK(back[i].iodine == static_cast<double>(static_cast<float>(m[i].iodine)));
  }
}

TEST_CASE("loader errors name the file and field") {
  TempDir d;
  const std::string missing = d / "nope";
  CHECK(what_of([&] { io::load_image(missing); }).find("nope.json") != std::string::npos);

  put(d / "bad.json", R"({"kind": "mono_image", "width": 2, "energy_kev": 80, "dose_cc": 80, "reference_cc": 80})");
  const std::string msg = what_of([&] { io::load_image(d / "bad"); });
  CHECK(msg.find("bad.json") != std::string::npos);
  CHECK(msg.find("'height'") != std::string::npos);

  MonoImage img(2, 2, 80.0, 80.0, 80.0);
  io::save_image(d / "short", img);
  put(d / "short.raw", std::string(12, '\0'));
  const std::string short_msg = what_of([&] { io::load_image(d / "short"); });
  CHECK(short_msg.find("short.raw") != std::string::npos);
  CHECK(short_msg.find("3 values") != std::string::npos);

  CHECK(what_of([&] { io::load_fraction_map(d / "short"); }).find("not a fraction_map") != std::string::npos);

  put(d / "garbage.json", "{ not json");
  CHECK(what_of([&] { io::load_image(d / "garbage"); }).find("garbage.json") != std::string::npos);
}

TEST_CASE("phantom spec json round trip") {
  TempDir d;
  const PhantomSpec s = random_phantom_spec(48, 40, 77);
  io::save_phantom_spec(d / "spec.json", s);
  const PhantomSpec back = io::load_phantom_spec(d / "spec.json");
  CHECK(io::phantom_spec_to_json(back) == io::phantom_spec_to_json(s));
  CHECK(generate_phantom(back) == generate_phantom(s));
}

TEST_CASE("phantom spec errors") {
  using nlohmann::json;
  const json no_width = {{"height", 4}};
  CHECK(what_of([&] { io::phantom_spec_from_json(no_width); }).find("'width'") != std::string::npos);
  const json bad_vessel = {{"width", 8}, {"height", 8}, {"vessels", {{{"cx", 1}, {"cy", 1}, {"radius", 1}}}}};
  const std::string m = what_of([&] { io::phantom_spec_from_json(bad_vessel); });
  CHECK(m.find("vessel 0") != std::string::npos);
  CHECK(m.find("iodine_fraction") != std::string::npos);
  const json bad_shape = {{"width", 8}, {"height", 8}, {"bones", {{{"shape", "disc"}, {"bone_fraction", 0.5}}}}};
  CHECK(what_of([&] { io::phantom_spec_from_json(bad_shape); }).find("'disc'") != std::string::npos);
  const json wrong_type = {{"width", "eight"}, {"height", 8}};
  CHECK(what_of([&] { io::phantom_spec_from_json(wrong_type); }).find("wrong type") != std::string::npos);
}

TEST_CASE("model round trip") {
  TempDir d;
  PatchMlp m = PatchMlp::random(3, 5, 9);
  for (double& b : m.b2()) b = 0.125;
  m.condition_offset = -0.5;
  m.condition_scale = 2.0;
  io::save_model(d / "mlp", DenoiserModel(m), io::ScheduleParams{50, 0.02, 0.4}, {{"epochs", 7}});
  const io::StoredModel back = io::load_model(d / "mlp");
  REQUIRE(back.model.kind() == DenoiserKind::patch_mlp);
  const PatchMlp& b = back.model.mlp();
  CHECK(b.patch() == 3);
  CHECK(b.hidden() == 5);
  CHECK(b.condition_offset == -0.5);
  CHECK(b.condition_scale == 2.0);
  const auto p = m.parameters();
  const auto q = b.parameters();
  REQUIRE(p.size() == q.size());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[i] == static_cast<double>(static_cast<float>(p[i])));
  REQUIRE(back.schedule.has_value());
  CHECK(back.schedule->steps == 50);
  CHECK(back.schedule->beta_end == 0.4);
  CHECK(back.extra.at("epochs") == 7);

  io::save_model(d / "oracle", DenoiserModel(GaussianOracle{2.0, 0.25}), std::nullopt);
  const io::StoredModel o = io::load_model(d / "oracle");
  CHECK(o.model.oracle().prior_mean == 2.0);
  CHECK(o.model.oracle().prior_var == 0.25);
  CHECK_FALSE(o.schedule.has_value());
  CHECK_FALSE(fs::exists(d / "oracle.raw"));
}

TEST_CASE("model header mismatches are rejected") {
  TempDir d;
  io::save_model(d / "m", DenoiserModel(PatchMlp::random(2, 3, 1)), std::nullopt);
  auto header = nlohmann::json::parse(io::read_file(d / "m.json"));
  header["output_head"] = "eps_direct";
  put(d / "m.json", header.dump());
  CHECK(what_of([&] { io::load_model(d / "m"); }).find("output head") != std::string::npos);
  header["kind"] = "unet";
  put(d / "m.json", header.dump());
  CHECK(what_of([&] { io::load_model(d / "m"); }).find("'unet'") != std::string::npos);
}

TEST_CASE("atomic write replaces and leaves no temporary") {
  TempDir d;
  const std::string p = d / "sub/dir/file.txt";
  io::write_file_atomic(p, "first");
  io::write_file_atomic(p, "second");
  CHECK(io::read_file(p) == "second");
  CHECK_FALSE(fs::exists(p + ".tmp"));
  CHECK(what_of([&] { io::read_file(d / "absent.txt"); }).find("absent.txt") != std::string::npos);
}

TEST_CASE("pgm export") {
  TempDir d;
  Grid<double> g(3, 2);
  g[0] = -1.0;
  g[1] = 0.0;
  g[2] = 0.5;
  g[3] = 1.0;
  g[4] = 2.0;
  g[5] = 0.25;
  io::export_pgm(d / "a.pgm", g, 0.0, 1.0);
  const std::string bytes = io::read_file(d / "a.pgm");
  const std::string head = "P5\n3 2\n255\n";
  REQUIRE(bytes.size() == head.size() + 6);
  CHECK(bytes.substr(0, head.size()) == head);
  const auto px = [&](int i) { return static_cast<int>(static_cast<unsigned char>(bytes[head.size() + i])); };
  CHECK(px(0) == 0);
  CHECK(px(1) == 0);
  CHECK(px(2) == 128);
  CHECK(px(3) == 255);
  CHECK(px(4) == 255);
  CHECK(px(5) == 64);
  CHECK_THROWS_AS(io::export_pgm(d / "b.pgm", g, 1.0, 1.0), Error);
}

TEST_CASE("loss trace csv") {
  CHECK(io::loss_trace_csv({0.5, 0.25}).rfind("epoch,loss\n1,", 0) == 0);
}

}  // TEST_SUITE
