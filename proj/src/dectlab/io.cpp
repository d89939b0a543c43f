#include "dectlab/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dectlab/error.hpp"

namespace dectlab::io {

using nlohmann::json;

namespace {

[[noreturn]] void io_error(const std::string& what) { throw Error(Errc::io, "io", what); }
[[noreturn]] void parse_error(const std::string& what) { throw Error(Errc::parse, "io", what); }

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

json read_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    parse_error(path + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) parse_error(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    parse_error(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
  return j.contains(key) ? field<T>(j, key, where) : fallback;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void check_payload(const std::vector<float>& values, std::size_t expected, const std::string& path) {
  if (values.size() != expected) {
    parse_error(path + ": payload has " + std::to_string(values.size()) + " values, sidecar implies " +
                std::to_string(expected));
  }
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) io_error("cannot create directory " + target.parent_path().string() + ": " + ec.message());
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) io_error("cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) io_error("short write to " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) io_error("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string raw_path(const std::string& base) { return base + ".raw"; }
std::string sidecar_path(const std::string& base) { return base + ".json"; }

std::vector<float> to_float32(std::span<const double> values) {
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i]);
  return out;
}

std::string float32_bytes(std::span<const float> values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t le = to_le(std::bit_cast<std::uint32_t>(values[i]));
    std::memcpy(bytes.data() + 4 * i, &le, 4);
  }
  return bytes;
}

std::vector<float> parse_float32(const std::string& bytes) {
  if (bytes.size() % 4 != 0) parse_error("raw payload size is not a multiple of 4 bytes");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t le;
    std::memcpy(&le, bytes.data() + 4 * i, 4);
    out[i] = std::bit_cast<float>(to_le(le));
  }
  return out;
}

void save_image(const std::string& base, const MonoImage& image) {
  json meta = {
      {"kind", "mono_image"},
      {"format", "float32-le"},
      {"layout", "row-major"},
      {"width", image.width()},
      {"height", image.height()},
      {"channels", json::array({"attenuation_cm-1"})},
      {"energy_kev", image.energy_kev},
      {"dose_cc", image.dose_cc},
      {"reference_cc", image.reference_cc},
      {"dose_scale", image.dose_scale()},
  };
  write_file_atomic(raw_path(base), float32_bytes(to_float32(image.values())));
  write_file_atomic(sidecar_path(base), dump(meta));
}

MonoImage load_image(const std::string& base) {
  const std::string where = sidecar_path(base);
  const json meta = read_json(where);
  if (field<std::string>(meta, "kind", where) != "mono_image") parse_error(where + ": not a mono_image sidecar");
  const int w = field<int>(meta, "width", where);
  const int h = field<int>(meta, "height", where);
  if (w <= 0 || h <= 0) parse_error(where + ": width and height must be positive");
  MonoImage img(w, h, field<double>(meta, "energy_kev", where), field<double>(meta, "dose_cc", where),
                field<double>(meta, "reference_cc", where));
  const auto values = parse_float32(read_file(raw_path(base)));
  check_payload(values, img.size(), raw_path(base));
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = values[i];
  return img;
}

void save_fraction_map(const std::string& base, const FractionMap& map) {
  json meta = {
      {"kind", "fraction_map"},
      {"format", "float32-le"},
      {"layout", "planar row-major"},
      {"width", map.width()},
      {"height", map.height()},
      {"channels", json::array({"water", "bone", "iodine"})},
  };
  std::vector<double> planes(3 * map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    planes[i] = map[i].water;
    planes[map.size() + i] = map[i].bone;
    planes[2 * map.size() + i] = map[i].iodine;
  }
  write_file_atomic(raw_path(base), float32_bytes(to_float32(planes)));
  write_file_atomic(sidecar_path(base), dump(meta));
}

FractionMap load_fraction_map(const std::string& base) {
  const std::string where = sidecar_path(base);
  const json meta = read_json(where);
  if (field<std::string>(meta, "kind", where) != "fraction_map") parse_error(where + ": not a fraction_map sidecar");
  const int w = field<int>(meta, "width", where);
  const int h = field<int>(meta, "height", where);
  if (w <= 0 || h <= 0) parse_error(where + ": width and height must be positive");
  FractionMap map(w, h);
  const auto values = parse_float32(read_file(raw_path(base)));
  check_payload(values, 3 * map.size(), raw_path(base));
  for (std::size_t i = 0; i < map.size(); ++i) {
    map[i] = {values[i], values[map.size() + i], values[2 * map.size() + i]};
  }
  return map;
}

void export_pgm(const std::string& path, const Grid<double>& image, double lo, double hi) {
  if (!(hi > lo)) throw Error(Errc::invalid_argument, "io", "pgm window needs hi > lo");
  std::string bytes = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  bytes.reserve(bytes.size() + image.size());
  for (double v : image.values()) {
    const double s = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(s * 255.0))));
  }
  write_file_atomic(path, bytes);
}

PhantomSpec phantom_spec_from_json(const json& j) {
  const std::string where = "phantom spec";
  if (!j.is_object()) parse_error(where + ": expected a JSON object");
  PhantomSpec spec;
  spec.width = field<int>(j, "width", where);
  spec.height = field<int>(j, "height", where);
  spec.noise_sigma = field_or<double>(j, "noise_sigma", 0.0, where);
  spec.seed = field_or<std::uint64_t>(j, "seed", 0, where);
  if (j.contains("vessels")) {
    int i = 0;
    for (const json& v : j.at("vessels")) {
      const std::string w = where + " vessel " + std::to_string(i++);
      spec.vessels.push_back({field<double>(v, "cx", w), field<double>(v, "cy", w), field<double>(v, "radius", w),
                              field<double>(v, "iodine_fraction", w)});
    }
  }
  if (j.contains("bones")) {
    int i = 0;
    for (const json& b : j.at("bones")) {
      const std::string w = where + " bone " + std::to_string(i++);
      BoneSpec bone;
      const std::string shape = field<std::string>(b, "shape", w);
      bone.bone_fraction = field<double>(b, "bone_fraction", w);
      if (shape == "rect") {
        bone.shape = BoneSpec::Shape::rect;
        bone.x0 = field<double>(b, "x0", w);
        bone.y0 = field<double>(b, "y0", w);
        bone.x1 = field<double>(b, "x1", w);
        bone.y1 = field<double>(b, "y1", w);
      } else if (shape == "annulus") {
        bone.shape = BoneSpec::Shape::annulus;
        bone.cx = field<double>(b, "cx", w);
        bone.cy = field<double>(b, "cy", w);
        bone.r_inner = field<double>(b, "r_inner", w);
        bone.r_outer = field<double>(b, "r_outer", w);
      } else {
        parse_error(w + ": shape must be 'rect' or 'annulus', got '" + shape + "'");
      }
      spec.bones.push_back(bone);
    }
  }
  return spec;
}

json phantom_spec_to_json(const PhantomSpec& spec) {
  json j = {{"width", spec.width}, {"height", spec.height}, {"noise_sigma", spec.noise_sigma}, {"seed", spec.seed}};
  j["vessels"] = json::array();
  for (const VesselSpec& v : spec.vessels) {
    j["vessels"].push_back({{"cx", v.cx}, {"cy", v.cy}, {"radius", v.radius}, {"iodine_fraction", v.iodine_fraction}});
  }
  j["bones"] = json::array();
  for (const BoneSpec& b : spec.bones) {
    if (b.shape == BoneSpec::Shape::rect) {
      j["bones"].push_back({{"shape", "rect"}, {"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1},
                            {"bone_fraction", b.bone_fraction}});
    } else {
      j["bones"].push_back({{"shape", "annulus"}, {"cx", b.cx}, {"cy", b.cy}, {"r_inner", b.r_inner},
                            {"r_outer", b.r_outer}, {"bone_fraction", b.bone_fraction}});
    }
  }
  return j;
}

PhantomSpec load_phantom_spec(const std::string& path) {
  try {
    return phantom_spec_from_json(read_json(path));
  } catch (const Error& e) {
    if (e.code() == Errc::parse) parse_error(path + ": " + e.what());
    throw;
  }
}

void save_phantom_spec(const std::string& path, const PhantomSpec& spec) {
  write_file_atomic(path, dump(phantom_spec_to_json(spec)));
}

void save_model(const std::string& base, const DenoiserModel& model, const std::optional<ScheduleParams>& schedule,
                const json& extra) {
  json header = {{"kind", to_string(model.kind())}};
  if (model.kind() == DenoiserKind::oracle_gaussian) {
    header["prior_mean"] = model.oracle().prior_mean;
    header["prior_var"] = model.oracle().prior_var;
  } else {
    const PatchMlp& mlp = model.mlp();
    mlp.check();
    header["format"] = "float32-le";
    header["patch"] = mlp.patch();
    header["hidden"] = mlp.hidden();
    header["input_size"] = mlp.input_size();
    header["output_size"] = mlp.output_size();
    header["input_layout"] = PatchMlp::kInputLayout;
    header["output_head"] = PatchMlp::kOutputHead;
    header["condition_offset"] = mlp.condition_offset;
    header["condition_scale"] = mlp.condition_scale;
    header["activation"] = "relu";
    header["parameter_blocks"] = json::array({"w1", "b1", "w2", "b2"});
    header["parameter_count"] = mlp.parameter_count();
    write_file_atomic(raw_path(base), float32_bytes(to_float32(mlp.parameters())));
  }
  if (schedule) {
    header["schedule"] = {{"shape", "linear"},
                          {"steps", schedule->steps},
                          {"beta_start", schedule->beta_start},
                          {"beta_end", schedule->beta_end}};
  }
  if (!extra.empty()) header["hyperparameters"] = extra;
  write_file_atomic(sidecar_path(base), dump(header));
}

StoredModel load_model(const std::string& base) {
  const std::string where = sidecar_path(base);
  const json header = read_json(where);
  const std::string kind = field<std::string>(header, "kind", where);
  std::optional<ScheduleParams> schedule;
  if (header.contains("schedule")) {
    const json& s = header.at("schedule");
    schedule = ScheduleParams{field<int>(s, "steps", where), field<double>(s, "beta_start", where),
                              field<double>(s, "beta_end", where)};
  }
  json extra = header.value("hyperparameters", json::object());
  if (kind == "oracle-gaussian") {
    return {DenoiserModel(GaussianOracle{field<double>(header, "prior_mean", where),
                                         field<double>(header, "prior_var", where)}),
            schedule, extra};
  }
  if (kind != "patch-mlp") parse_error(where + ": unknown model kind '" + kind + "'");
  if (field<std::string>(header, "input_layout", where) != PatchMlp::kInputLayout) {
    parse_error(where + ": unsupported input layout");
  }
  if (field<std::string>(header, "output_head", where) != PatchMlp::kOutputHead) {
    parse_error(where + ": unsupported output head");
  }
  PatchMlp mlp(field<int>(header, "patch", where), field<int>(header, "hidden", where));
  mlp.condition_offset = field<double>(header, "condition_offset", where);
  mlp.condition_scale = field<double>(header, "condition_scale", where);
  const auto values = parse_float32(read_file(raw_path(base)));
  check_payload(values, mlp.parameter_count(), raw_path(base));
  auto params = mlp.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] = values[i];
  mlp.check();
  return {DenoiserModel(std::move(mlp)), schedule, extra};
}

std::string loss_trace_csv(const std::vector<double>& trace) {
  std::ostringstream os;
  os.precision(9);
  os << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) os << (i + 1) << "," << trace[i] << "\n";
  return os.str();
}

}  // namespace dectlab::io
