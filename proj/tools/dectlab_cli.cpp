// dectlab-cli: pipeline driver over the dectlab C API.

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dectlab.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(dl_status s, const std::string& context) {
  if (s != DL_OK) throw CliError(context + ": " + dl_last_error());
}

template <class T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using Table = std::unique_ptr<dl_table, Deleter<dl_table, dl_table_destroy>>;
using Spec = std::unique_ptr<dl_spec, Deleter<dl_spec, dl_spec_destroy>>;
using Fractions = std::unique_ptr<dl_fractions, Deleter<dl_fractions, dl_fractions_destroy>>;
using Mask = std::unique_ptr<dl_mask, Deleter<dl_mask, dl_mask_destroy>>;
using Image = std::unique_ptr<dl_image, Deleter<dl_image, dl_image_destroy>>;
using Schedule = std::unique_ptr<dl_schedule, Deleter<dl_schedule, dl_schedule_destroy>>;
using Model = std::unique_ptr<dl_model, Deleter<dl_model, dl_model_destroy>>;

bool g_quiet = false;

void note(const std::string& msg) {
  if (!g_quiet) std::cerr << msg << '\n';
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---- loading helpers

Table default_table() {
  dl_table* t = nullptr;
  check(dl_table_default(&t), "attenuation table");
  return Table(t);
}

Image load_image(const std::string& base) {
  dl_image* p = nullptr;
  check(dl_image_load(base.c_str(), &p), base);
  return Image(p);
}

Fractions load_fractions(const std::string& base) {
  dl_fractions* p = nullptr;
  check(dl_fractions_load(base.c_str(), &p), base);
  return Fractions(p);
}

dl_image_info info_of(const dl_image* img) {
  dl_image_info info{};
  check(dl_image_info_get(img, &info), "image");
  return info;
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void save_image(const dl_image* img, const std::string& base) {
  ensure_parent(base);
  check(dl_image_save(img, base.c_str()), base);
}

void save_fractions(const dl_fractions* map, const std::string& base) {
  ensure_parent(base);
  check(dl_fractions_save(map, base.c_str()), base);
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  check(dl_write_file_atomic(path.c_str(), text.data(), text.size()), path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(path + ": cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Files written for a stored base path (raw payload plus sidecar).
std::vector<std::string> stored_files(const std::string& base) { return {base + ".raw", base + ".json"}; }

dl_clamp_policy parse_clamp(const std::string& s, const std::string& where) {
  if (s == "clamp-renormalize") return DL_CLAMP_RENORMALIZE;
  if (s == "raw") return DL_CLAMP_RAW;
  throw CliError(where + ": unknown clamp policy '" + s + "' (expected clamp-renormalize or raw)");
}

dl_overflow_policy parse_overflow(const std::string& s, const std::string& where) {
  if (s == "error") return DL_OVERFLOW_ERROR;
  if (s == "saturate") return DL_OVERFLOW_SATURATE;
  throw CliError(where + ": unknown overflow policy '" + s + "' (expected error or saturate)");
}

dl_optimizer parse_optimizer(const std::string& s, const std::string& where) {
  if (s == "adam") return DL_OPTIMIZER_ADAM;
  if (s == "sgd") return DL_OPTIMIZER_SGD;
  throw CliError(where + ": unknown optimizer '" + s + "' (expected adam or sgd)");
}

// ---- manifest

std::string sha256_file(const std::string& path) {
  const std::string bytes = read_text(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw CliError(path + ": hashing failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}

  json parameters = json::object();
  json seeds = json::object();
  json results = json::object();

  void input(const std::string& path) { inputs_.push_back(path); }
  void inputs(const std::vector<std::string>& paths) {
    for (const auto& p : paths) input(p);
  }
  void output(const std::string& path) { outputs_.push_back(path); }
  void outputs(const std::vector<std::string>& paths) {
    for (const auto& p : paths) output(p);
  }

  void write(const std::string& path) const {
    const fs::path dir = fs::absolute(path).parent_path();
    auto entries = [&](const std::vector<std::string>& files) {
      json arr = json::array();
      std::map<std::string, std::string> sorted;
      for (const auto& f : files) {
        sorted[fs::absolute(f).lexically_normal().lexically_relative(dir).generic_string()] = sha256_file(f);
      }
      for (const auto& [rel, hash] : sorted) arr.push_back({{"path", rel}, {"sha256", hash}});
      return arr;
    };
    json j = {{"tool", "dectlab-cli"},
              {"version", dl_version()},
              {"command", command_},
              {"parameters", parameters},
              {"seeds", seeds},
              {"inputs", entries(inputs_)},
              {"outputs", entries(outputs_)}};
    if (!results.empty()) j["results"] = results;
    write_text(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
};

std::string default_manifest(const std::string& first_output) { return first_output + ".manifest.json"; }

// ---- stages (shared by the subcommands and run-all)

struct PhantomGenArgs {
  std::string spec_path;  // empty: random spec
  int width = 64;
  int height = 64;
  uint64_t seed = 0;
  std::string out;
  std::string spec_out;  // empty: not written
};

void stage_phantom_gen(const PhantomGenArgs& a, Manifest& m) {
  dl_spec* sp = nullptr;
  if (!a.spec_path.empty()) {
    check(dl_spec_load(a.spec_path.c_str(), &sp), a.spec_path);
    m.input(a.spec_path);
    m.parameters["spec"] = a.spec_path;
  } else {
    check(dl_spec_random(a.width, a.height, a.seed, &sp), "random phantom");
    m.parameters["random"] = {{"width", a.width}, {"height", a.height}};
    m.seeds["phantom"] = a.seed;
  }
  Spec spec(sp);
  dl_fractions* fp = nullptr;
  check(dl_phantom_generate(spec.get(), &fp), "phantom");
  Fractions map(fp);
  save_fractions(map.get(), a.out);
  m.outputs(stored_files(a.out));
  if (!a.spec_out.empty()) {
    ensure_parent(a.spec_out);
    check(dl_spec_save(spec.get(), a.spec_out.c_str()), a.spec_out);
    m.output(a.spec_out);
  }
}

struct ComposeArgs {
  std::string fractions;
  double energy_kev = 80.0;
  double noise_sigma = 0.0;
  uint64_t seed = 0;
  double dose_cc = 80.0;
  double reference_cc = 80.0;
  std::string out;
};

void stage_compose(const ComposeArgs& a, Manifest& m) {
  Table table = default_table();
  Fractions map = load_fractions(a.fractions);
  m.inputs(stored_files(a.fractions));
  dl_image* ip = nullptr;
  check(dl_compose(map.get(), table.get(), a.energy_kev, a.noise_sigma, a.seed, a.dose_cc, a.reference_cc, &ip),
        "compose");
  Image img(ip);
  save_image(img.get(), a.out);
  m.outputs(stored_files(a.out));
  m.parameters.update({{"energy_kev", a.energy_kev},
                       {"noise_sigma", a.noise_sigma},
                       {"dose_cc", a.dose_cc},
                       {"reference_cc", a.reference_cc}});
  m.seeds["noise"] = a.seed;
}

struct DecomposeArgs {
  std::string low, high;
  std::string clamp = "clamp-renormalize";
  std::string out;
};

void stage_decompose(const DecomposeArgs& a, Manifest& m) {
  Table table = default_table();
  Image low = load_image(a.low), high = load_image(a.high);
  m.inputs(stored_files(a.low));
  m.inputs(stored_files(a.high));
  dl_fractions* fp = nullptr;
  dl_decomp_report rep{};
  check(dl_decompose(low.get(), high.get(), table.get(), parse_clamp(a.clamp, "--clamp-policy"), &fp, &rep),
        "decompose");
  Fractions map(fp);
  save_fractions(map.get(), a.out);
  m.outputs(stored_files(a.out));
  m.parameters["clamp_policy"] = a.clamp;
  m.results = {{"clamped", rep.clamped}, {"out_of_range", rep.out_of_range}, {"max_residual", rep.max_residual}};
}

struct SimulateArgs {
  std::string fractions;
  double dose_cc = 10.0;
  double reference_cc = 80.0;
  double noise_sigma = 0.0;
  uint64_t seed = 0;
  std::string out_low, out_high;
};

void stage_simulate(const SimulateArgs& a, Manifest& m) {
  Table table = default_table();
  Fractions map = load_fractions(a.fractions);
  m.inputs(stored_files(a.fractions));
  dl_image *lp = nullptr, *hp = nullptr;
  check(dl_simulate_low_dose(map.get(), table.get(), a.dose_cc, a.reference_cc, a.noise_sigma, a.seed, &lp, &hp),
        "simulate-dose");
  Image low(lp), high(hp);
  save_image(low.get(), a.out_low);
  save_image(high.get(), a.out_high);
  m.outputs(stored_files(a.out_low));
  m.outputs(stored_files(a.out_high));
  m.parameters.update({{"dose_cc", a.dose_cc},
                       {"reference_cc", a.reference_cc},
                       {"dose_scale", a.dose_cc / a.reference_cc},
                       {"noise_sigma", a.noise_sigma}});
  m.seeds["noise"] = a.seed;
  m.seeds["noise_low"] = dl_derive_seed(a.seed, 0);
  m.seeds["noise_high"] = dl_derive_seed(a.seed, 1);
}

struct MdeArgs {
  std::string low, high;
  std::string clamp = "clamp-renormalize";
  std::string overflow = "saturate";
  std::string out_low, out_high;
};

void stage_mde(const MdeArgs& a, Manifest& m) {
  Table table = default_table();
  Image low = load_image(a.low), high = load_image(a.high);
  m.inputs(stored_files(a.low));
  m.inputs(stored_files(a.high));
  dl_image *lp = nullptr, *hp = nullptr;
  dl_mde_report rep{};
  check(dl_mde_enhance(low.get(), high.get(), table.get(), parse_clamp(a.clamp, "--clamp-policy"),
                       parse_overflow(a.overflow, "--overflow"), &lp, &hp, &rep),
        "enhance-mde");
  Image ol(lp), oh(hp);
  save_image(ol.get(), a.out_low);
  save_image(oh.get(), a.out_high);
  m.outputs(stored_files(a.out_low));
  m.outputs(stored_files(a.out_high));
  const dl_image_info info = info_of(low.get());
  m.parameters.update({{"clamp_policy", a.clamp},
                       {"overflow", a.overflow},
                       {"dose_cc", info.dose_cc},
                       {"reference_cc", info.reference_cc}});
  m.results = {{"clamped", rep.decomposition.clamped},
               {"out_of_range", rep.decomposition.out_of_range},
               {"saturated", rep.saturated}};
}

struct ScheduleArgs {
  int steps = 50;
  double beta_start = 0.02;
  double beta_end = 0.4;
};

Schedule make_schedule(const ScheduleArgs& s) {
  dl_schedule* p = nullptr;
  check(dl_schedule_linear(s.steps, s.beta_start, s.beta_end, &p), "schedule");
  return Schedule(p);
}

json schedule_json(const ScheduleArgs& s) {
  return {{"steps", s.steps}, {"beta_start", s.beta_start}, {"beta_end", s.beta_end}};
}

struct TrainArgs {
  std::vector<std::string> targets, conditions;
  ScheduleArgs schedule;
  dl_train_config config{};
  std::string optimizer = "adam";
  std::string out;
  std::string loss_csv;  // empty: <out>_loss.csv
};

std::string loss_csv_path(const TrainArgs& a) { return a.loss_csv.empty() ? a.out + "_loss.csv" : a.loss_csv; }

void stage_train(const TrainArgs& a, Manifest& m) {
  if (a.targets.empty()) throw CliError("train-ddpm: at least one --target is required");
  if (a.targets.size() != a.conditions.size()) {
    throw CliError("train-ddpm: " + std::to_string(a.targets.size()) + " targets but " +
                   std::to_string(a.conditions.size()) + " conditions");
  }
  std::vector<Image> owned;
  std::vector<const dl_image*> t, c;
  for (std::size_t i = 0; i < a.targets.size(); ++i) {
    owned.push_back(load_image(a.targets[i]));
    t.push_back(owned.back().get());
    owned.push_back(load_image(a.conditions[i]));
    c.push_back(owned.back().get());
    m.inputs(stored_files(a.targets[i]));
    m.inputs(stored_files(a.conditions[i]));
  }
  Schedule sched = make_schedule(a.schedule);
  dl_train_config cfg = a.config;
  cfg.optimizer = parse_optimizer(a.optimizer, "--optimizer");
  auto progress = [](int epoch, double loss, void*) {
    if (!g_quiet) std::cerr << "  epoch " << epoch << " loss " << fmt(loss) << '\n';
  };
  dl_model* mp = nullptr;
  check(dl_train_denoiser(t.data(), c.data(), t.size(), sched.get(), &cfg, progress, nullptr, &mp), "train-ddpm");
  Model model(mp);
  ensure_parent(a.out);
  check(dl_model_save(model.get(), a.out.c_str(), sched.get(), nullptr), a.out);
  const std::string csv = loss_csv_path(a);
  ensure_parent(csv);
  check(dl_model_write_loss_csv(model.get(), csv.c_str()), csv);
  m.outputs(stored_files(a.out));
  m.output(csv);
  m.parameters["schedule"] = schedule_json(a.schedule);
  m.parameters["train"] = {{"epochs", cfg.epochs},
                           {"batch_size", cfg.batch_size},
                           {"learning_rate", cfg.learning_rate},
                           {"patch", cfg.patch},
                           {"hidden", cfg.hidden},
                           {"patch_stride", cfg.patch_stride},
                           {"optimizer", a.optimizer}};
  m.seeds["train"] = cfg.seed;
  size_t n = 0;
  check(dl_model_loss_trace(model.get(), nullptr, 0, &n), "loss trace");
  std::vector<double> trace(n);
  check(dl_model_loss_trace(model.get(), trace.data(), n, &n), "loss trace");
  if (!trace.empty()) m.results = {{"first_loss", trace.front()}, {"final_loss", trace.back()}};
}

struct EnhanceDdpmArgs {
  std::string model, input;
  uint64_t seed = 0;
  std::string out;
};

void stage_enhance_ddpm(const EnhanceDdpmArgs& a, Manifest& m) {
  dl_model* mp = nullptr;
  dl_schedule* sp = nullptr;
  check(dl_model_load(a.model.c_str(), &mp, &sp), a.model);
  Model model(mp);
  Schedule sched(sp);
  if (!sched) throw CliError(a.model + ": model header has no schedule");
  Image low = load_image(a.input);
  m.inputs(stored_files(a.model));
  m.inputs(stored_files(a.input));
  dl_image* op = nullptr;
  check(dl_enhance_ddpm(low.get(), model.get(), sched.get(), a.seed, &op), "enhance-ddpm");
  Image out(op);
  save_image(out.get(), a.out);
  m.outputs(stored_files(a.out));
  m.seeds["sampling"] = a.seed;
}

struct EvaluateArgs {
  std::string truth, low, high;
  std::string method = "none";
  std::string phantom_id;
  std::optional<double> dose_cc;
  uint64_t seed = 0;
  double data_range = 4.0;
  int ssim_window = 7;
  double mask_threshold = 0.01;
  std::optional<double> hole_threshold;  // default: half the largest iodine fraction in truth
  std::string clamp = "clamp-renormalize";
  std::string csv;
};

const char* kCsvHeader = "phantom_id,dose_cc,method,seed,energy_kev,psnr_db,ssim,vessel_mae,hole_count,hole_pixel_fraction\n";

void stage_evaluate(const EvaluateArgs& a, Manifest& m) {
  Table table = default_table();
  Fractions truth = load_fractions(a.truth);
  Image low = load_image(a.low), high = load_image(a.high);
  m.inputs(stored_files(a.truth));
  m.inputs(stored_files(a.low));
  m.inputs(stored_files(a.high));

  int w = 0, h = 0;
  check(dl_fractions_shape(truth.get(), &w, &h), a.truth);
  std::vector<double> iodine(static_cast<std::size_t>(w) * h);
  check(dl_fractions_copy(truth.get(), nullptr, nullptr, iodine.data()), a.truth);
  double max_iodine = 0.0;
  for (double v : iodine) max_iodine = std::max(max_iodine, v);
  const double hole_thr = a.hole_threshold ? *a.hole_threshold : 0.5 * max_iodine;

  dl_mask* mk = nullptr;
  check(dl_vessel_mask(truth.get(), a.mask_threshold, &mk), a.truth + ": vessel mask");
  Mask mask(mk);
  dl_hole_stats holes{};
  check(dl_hole_metric(low.get(), high.get(), table.get(), mask.get(), hole_thr, parse_clamp(a.clamp, "--clamp-policy"),
                       &holes),
        "hole metric");

  const double dose = a.dose_cc ? *a.dose_cc : info_of(low.get()).dose_cc;
  const std::string id = a.phantom_id.empty() ? fs::path(a.truth).filename().string() : a.phantom_id;
  std::string rows;
  json results = json::array();
  for (const dl_image* img : {low.get(), high.get()}) {
    const dl_image_info info = info_of(img);
    dl_image* rp = nullptr;
    check(dl_compose(truth.get(), table.get(), info.energy_kev, 0.0, 0, info.reference_cc, info.reference_cc, &rp),
          "reference image");
    Image ref(rp);
    double p = 0, s = 0, mae = 0;
    check(dl_psnr(img, ref.get(), a.data_range, &p), "psnr");
    check(dl_ssim(img, ref.get(), a.data_range, a.ssim_window, &s), "ssim");
    check(dl_masked_mae(img, ref.get(), mask.get(), &mae), "vessel mae");
    rows += id + "," + fmt(dose) + "," + a.method + "," + std::to_string(a.seed) + "," + fmt(info.energy_kev) + "," +
            fmt(p) + "," + fmt(s) + "," + fmt(mae) + "," + std::to_string(holes.hole_count) + "," +
            fmt(holes.hole_pixel_fraction) + "\n";
    results.push_back({{"energy_kev", info.energy_kev}, {"psnr_db", p}, {"ssim", s}, {"vessel_mae", mae}});
  }

  std::string existing;
  if (fs::exists(a.csv)) {
    existing = read_text(a.csv);
    if (existing.rfind(kCsvHeader, 0) != 0) throw CliError(a.csv + ": existing file has a different CSV header");
  } else {
    existing = kCsvHeader;
  }
  write_text(a.csv, existing + rows);
  m.output(a.csv);
  m.parameters.update({{"method", a.method},
                       {"phantom_id", id},
                       {"dose_cc", dose},
                       {"data_range", a.data_range},
                       {"ssim_window", a.ssim_window},
                       {"mask_threshold", a.mask_threshold},
                       {"hole_threshold", hole_thr},
                       {"clamp_policy", a.clamp}});
  m.seeds["key"] = a.seed;
  m.results = {{"energies", results},
               {"hole_count", holes.hole_count},
               {"hole_pixel_fraction", holes.hole_pixel_fraction}};
}

// ---- run-all

struct RunConfig {
  fs::path base_dir;  // relative paths in the config resolve against this
  std::string output_dir = "run";
  uint64_t seed = 20240601;
  std::vector<std::string> phantom_specs;
  int train_phantoms = 24;
  int test_phantoms = 10;
  int width = 48;
  int height = 48;
  std::vector<double> dose_ladder_cc{10, 20, 30, 40, 50, 60, 70, 80};
  double reference_cc = 80.0;
  double noise_sigma = 0.005;
  std::vector<std::string> methods{"mde", "ddpm"};
  ScheduleArgs schedule;
  dl_train_config train{};
  std::string optimizer = "adam";
  std::string clamp = "clamp-renormalize";
  std::string overflow = "saturate";
  double mask_threshold = 0.01;
  std::optional<double> hole_threshold;
  double data_range = 4.0;
  int ssim_window = 7;
};

template <class T>
void read_field(const json& j, const char* key, T& out, const std::string& file) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw CliError(file + ": field '" + key + "': " + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  RunConfig c;
  dl_train_config_default(&c.train);
  if (path.empty()) {
    c.base_dir = fs::current_path();
    return c;
  }
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw CliError(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw CliError(path + ": expected a JSON object");
  c.base_dir = fs::absolute(path).parent_path();
  static const std::set<std::string> known{"output_dir", "seed", "phantom_specs", "random_phantoms", "dose_ladder_cc",
                                           "reference_cc", "noise_sigma", "methods", "schedule", "train",
                                           "clamp_policy", "mde_overflow", "mask_threshold", "hole_threshold",
                                           "data_range", "ssim_window"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw CliError(path + ": unknown field '" + k + "'");
  }
  read_field(j, "output_dir", c.output_dir, path);
  read_field(j, "seed", c.seed, path);
  read_field(j, "phantom_specs", c.phantom_specs, path);
  if (j.contains("random_phantoms")) {
    const json& r = j["random_phantoms"];
    read_field(r, "train", c.train_phantoms, path);
    read_field(r, "test", c.test_phantoms, path);
    read_field(r, "width", c.width, path);
    read_field(r, "height", c.height, path);
  }
  read_field(j, "dose_ladder_cc", c.dose_ladder_cc, path);
  read_field(j, "reference_cc", c.reference_cc, path);
  read_field(j, "noise_sigma", c.noise_sigma, path);
  read_field(j, "methods", c.methods, path);
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    read_field(s, "steps", c.schedule.steps, path);
    read_field(s, "beta_start", c.schedule.beta_start, path);
    read_field(s, "beta_end", c.schedule.beta_end, path);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    read_field(t, "epochs", c.train.epochs, path);
    read_field(t, "batch_size", c.train.batch_size, path);
    read_field(t, "learning_rate", c.train.learning_rate, path);
    read_field(t, "patch", c.train.patch, path);
    read_field(t, "hidden", c.train.hidden, path);
    read_field(t, "patch_stride", c.train.patch_stride, path);
    read_field(t, "report_every", c.train.report_every, path);
    read_field(t, "optimizer", c.optimizer, path);
  }
  read_field(j, "clamp_policy", c.clamp, path);
  read_field(j, "mde_overflow", c.overflow, path);
  read_field(j, "mask_threshold", c.mask_threshold, path);
  if (j.contains("hole_threshold") && !j["hole_threshold"].is_null()) {
    double v = 0;
    read_field(j, "hole_threshold", v, path);
    c.hole_threshold = v;
  }
  read_field(j, "data_range", c.data_range, path);
  read_field(j, "ssim_window", c.ssim_window, path);
  return c;
}

void validate_run_config(const RunConfig& c, const std::string& where) {
  if (c.methods.empty()) throw CliError(where + ": field 'methods' must not be empty");
  for (const auto& m : c.methods) {
    if (m != "mde" && m != "ddpm") throw CliError(where + ": field 'methods': unknown method '" + m + "'");
  }
  if (c.dose_ladder_cc.empty()) throw CliError(where + ": field 'dose_ladder_cc' must not be empty");
  for (double d : c.dose_ladder_cc) {
    if (!(d > 0.0)) throw CliError(where + ": field 'dose_ladder_cc': dose values must be positive");
  }
  if (!(c.reference_cc > 0.0)) throw CliError(where + ": field 'reference_cc' must be positive");
  if (!(c.noise_sigma >= 0.0)) throw CliError(where + ": field 'noise_sigma' must be >= 0");
  if (c.test_phantoms < 0 || c.train_phantoms < 0) throw CliError(where + ": phantom counts must be >= 0");
  if (c.test_phantoms == 0 && c.phantom_specs.empty()) throw CliError(where + ": no test phantoms configured");
  const bool ddpm = std::find(c.methods.begin(), c.methods.end(), "ddpm") != c.methods.end();
  if (ddpm && c.train_phantoms == 0) throw CliError(where + ": method ddpm needs random_phantoms.train > 0");
  parse_clamp(c.clamp, where + ": field 'clamp_policy'");
  parse_overflow(c.overflow, where + ": field 'mde_overflow'");
  parse_optimizer(c.optimizer, where + ": field 'train.optimizer'");
}

// Stage indices mixed into the master seed.
enum SeedStage : uint64_t {
  kSeedTrainPhantom = 1,
  kSeedTestPhantom = 2,
  kSeedDoseNoise = 3,
  kSeedTraining = 4,
  kSeedSampling = 5,
};

std::string dose_tag(double cc) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%gcc", cc);
  return buf;
}

int run_all(const RunConfig& c) {
  const fs::path out = fs::path(c.output_dir).is_absolute() ? fs::path(c.output_dir) : c.base_dir / c.output_dir;
  fs::create_directories(out);
  auto p = [&](const std::string& rel) { return (out / rel).generic_string(); };
  Table table = default_table();
  double low_kev = 0, high_kev = 0;
  check(dl_table_info(table.get(), &low_kev, &high_kev, nullptr), "attenuation table");
  const double energies[2] = {low_kev, high_kev};
  const char* energy_tag[2] = {"low", "high"};

  Manifest all("run-all");
  all.parameters = {{"output_dir", "."},
                    {"phantom_specs", c.phantom_specs},
                    {"random_phantoms",
                     {{"train", c.train_phantoms}, {"test", c.test_phantoms}, {"width", c.width}, {"height", c.height}}},
                    {"dose_ladder_cc", c.dose_ladder_cc},
                    {"reference_cc", c.reference_cc},
                    {"noise_sigma", c.noise_sigma},
                    {"methods", c.methods},
                    {"schedule", schedule_json(c.schedule)},
                    {"train",
                     {{"epochs", c.train.epochs},
                      {"batch_size", c.train.batch_size},
                      {"learning_rate", c.train.learning_rate},
                      {"patch", c.train.patch},
                      {"hidden", c.train.hidden},
                      {"patch_stride", c.train.patch_stride},
                      {"optimizer", c.optimizer}}},
                    {"clamp_policy", c.clamp},
                    {"mde_overflow", c.overflow},
                    {"mask_threshold", c.mask_threshold},
                    {"data_range", c.data_range},
                    {"ssim_window", c.ssim_window}};
  if (c.hole_threshold) all.parameters["hole_threshold"] = *c.hole_threshold;
  all.seeds["master"] = c.seed;
  // Sub-stage manifests are not written; their records feed this one.
  Manifest sink("stage");

  struct Phantom {
    std::string id;
    bool train;
    std::size_t index;  // position in the run, used for noise and sampling seeds
  };
  std::vector<Phantom> phantoms;

  // phantoms
  note("[run-all] phantoms");
  for (int i = 0; i < c.train_phantoms; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "train_%03d", i);
    PhantomGenArgs a;
    a.width = c.width;
    a.height = c.height;
    a.seed = dl_derive_seed(dl_derive_seed(c.seed, kSeedTrainPhantom), static_cast<uint64_t>(i));
    a.out = p(std::string("phantoms/") + id);
    a.spec_out = p(std::string("phantoms/") + id + ".spec.json");
    stage_phantom_gen(a, sink);
    all.outputs(stored_files(a.out));
    all.output(a.spec_out);
    all.seeds["phantoms"][id] = a.seed;
    phantoms.push_back({id, true, phantoms.size()});
  }
  for (const auto& spec : c.phantom_specs) {
    const fs::path sp = fs::path(spec).is_absolute() ? fs::path(spec) : c.base_dir / spec;
    std::string id = sp.stem().string();
    PhantomGenArgs a;
    a.spec_path = sp.generic_string();
    a.out = p("phantoms/" + id);
    stage_phantom_gen(a, sink);
    all.input(a.spec_path);
    all.outputs(stored_files(a.out));
    phantoms.push_back({id, false, phantoms.size()});
  }
  for (int i = 0; i < c.test_phantoms; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "test_%03d", i);
    PhantomGenArgs a;
    a.width = c.width;
    a.height = c.height;
    a.seed = dl_derive_seed(dl_derive_seed(c.seed, kSeedTestPhantom), static_cast<uint64_t>(i));
    a.out = p(std::string("phantoms/") + id);
    a.spec_out = p(std::string("phantoms/") + id + ".spec.json");
    stage_phantom_gen(a, sink);
    all.outputs(stored_files(a.out));
    all.output(a.spec_out);
    all.seeds["phantoms"][id] = a.seed;
    phantoms.push_back({id, false, phantoms.size()});
  }

  // full-dose noiseless pairs
  note("[run-all] full-dose pairs");
  for (const auto& ph : phantoms) {
    for (int e = 0; e < 2; ++e) {
      ComposeArgs a;
      a.fractions = p("phantoms/" + ph.id);
      a.energy_kev = energies[e];
      a.dose_cc = c.reference_cc;
      a.reference_cc = c.reference_cc;
      a.out = p("full/" + ph.id + "_" + energy_tag[e]);
      stage_compose(a, sink);
      all.outputs(stored_files(a.out));
    }
  }

  const bool want_mde = std::find(c.methods.begin(), c.methods.end(), "mde") != c.methods.end();
  const bool want_ddpm = std::find(c.methods.begin(), c.methods.end(), "ddpm") != c.methods.end();
  const std::string csv = p("metrics.csv");
  if (fs::exists(csv)) fs::remove(csv);

  for (std::size_t li = 0; li < c.dose_ladder_cc.size(); ++li) {
    const double cc = c.dose_ladder_cc[li];
    const std::string tag = dose_tag(cc);
    note("[run-all] dose " + tag);

    for (const auto& ph : phantoms) {
      SimulateArgs a;
      a.fractions = p("phantoms/" + ph.id);
      a.dose_cc = cc;
      a.reference_cc = c.reference_cc;
      a.noise_sigma = c.noise_sigma;
      a.seed = dl_derive_seed(dl_derive_seed(dl_derive_seed(c.seed, kSeedDoseNoise), li), ph.index);
      a.out_low = p("dose/" + tag + "/" + ph.id + "_low");
      a.out_high = p("dose/" + tag + "/" + ph.id + "_high");
      stage_simulate(a, sink);
      all.outputs(stored_files(a.out_low));
      all.outputs(stored_files(a.out_high));
      all.seeds["dose_noise"][tag][ph.id] = a.seed;
    }

    auto evaluate = [&](const std::string& id, const std::string& method, const std::string& low,
                        const std::string& high) {
      EvaluateArgs a;
      a.truth = p("phantoms/" + id);
      a.low = low;
      a.high = high;
      a.method = method;
      a.phantom_id = id;
      a.dose_cc = cc;
      a.seed = c.seed;
      a.data_range = c.data_range;
      a.ssim_window = c.ssim_window;
      a.mask_threshold = c.mask_threshold;
      a.hole_threshold = c.hole_threshold;
      a.clamp = c.clamp;
      a.csv = csv;
      stage_evaluate(a, sink);
    };

    for (const auto& ph : phantoms) {
      if (ph.train) continue;
      evaluate(ph.id, "none", p("dose/" + tag + "/" + ph.id + "_low"), p("dose/" + tag + "/" + ph.id + "_high"));
    }

    if (want_mde) {
      for (const auto& ph : phantoms) {
        if (ph.train) continue;
        MdeArgs a;
        a.low = p("dose/" + tag + "/" + ph.id + "_low");
        a.high = p("dose/" + tag + "/" + ph.id + "_high");
        a.clamp = c.clamp;
        a.overflow = c.overflow;
        a.out_low = p("mde/" + tag + "/" + ph.id + "_low");
        a.out_high = p("mde/" + tag + "/" + ph.id + "_high");
        stage_mde(a, sink);
        all.outputs(stored_files(a.out_low));
        all.outputs(stored_files(a.out_high));
        evaluate(ph.id, "mde", a.out_low, a.out_high);
      }
    }

    if (want_ddpm) {
      std::string models[2];
      for (int e = 0; e < 2; ++e) {
        TrainArgs t;
        for (const auto& ph : phantoms) {
          if (!ph.train) continue;
          t.targets.push_back(p("full/" + ph.id + "_" + energy_tag[e]));
          t.conditions.push_back(p("dose/" + tag + "/" + ph.id + "_" + energy_tag[e]));
        }
        t.schedule = c.schedule;
        t.config = c.train;
        t.config.seed = dl_derive_seed(dl_derive_seed(c.seed, kSeedTraining), li * 2 + e);
        t.optimizer = c.optimizer;
        t.out = p("models/ddpm_" + tag + "_" + energy_tag[e]);
        note("[run-all] train " + tag + " " + energy_tag[e]);
        stage_train(t, sink);
        all.outputs(stored_files(t.out));
        all.output(loss_csv_path(t));
        all.seeds["training"][tag][energy_tag[e]] = t.config.seed;
        models[e] = t.out;
      }
      for (const auto& ph : phantoms) {
        if (ph.train) continue;
        std::string outs[2];
        for (int e = 0; e < 2; ++e) {
          EnhanceDdpmArgs a;
          a.model = models[e];
          a.input = p("dose/" + tag + "/" + ph.id + "_" + energy_tag[e]);
          a.seed = dl_derive_seed(dl_derive_seed(dl_derive_seed(c.seed, kSeedSampling), li), ph.index * 2 + e);
          a.out = p("ddpm/" + tag + "/" + ph.id + "_" + energy_tag[e]);
          stage_enhance_ddpm(a, sink);
          all.outputs(stored_files(a.out));
          all.seeds["sampling"][tag][ph.id + "_" + energy_tag[e]] = a.seed;
          outs[e] = a.out;
        }
        evaluate(ph.id, "ddpm", outs[0], outs[1]);
      }
    }
  }

  all.output(csv);
  all.write(p("manifest.json"));
  note("[run-all] wrote " + csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-energy CT contrast-reduction lab"};
  app.require_subcommand(1);
  app.add_flag("-q,--quiet", g_quiet, "Suppress progress output");
  std::string manifest;
  auto add_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest, "Manifest path (default: <first output>.manifest.json)");
  };

  // phantom-gen
  PhantomGenArgs pg;
  bool pg_random = false;
  auto* s_pg = app.add_subcommand("phantom-gen", "Generate a fraction map from a phantom spec");
  s_pg->add_option("--spec", pg.spec_path, "Phantom spec JSON")->check(CLI::ExistingFile);
  s_pg->add_flag("--random", pg_random, "Draw a random head-like spec instead");
  s_pg->add_option("--width", pg.width, "Random phantom width")->capture_default_str();
  s_pg->add_option("--height", pg.height, "Random phantom height")->capture_default_str();
  s_pg->add_option("--seed", pg.seed, "Random spec seed")->capture_default_str();
  s_pg->add_option("--out", pg.out, "Output base path")->required();
  s_pg->add_option("--spec-out", pg.spec_out, "Also write the spec JSON here");
  add_manifest(s_pg);

  // compose
  ComposeArgs co;
  auto* s_co = app.add_subcommand("compose", "Compose a monoenergetic image from a fraction map");
  s_co->add_option("--fractions", co.fractions, "Fraction map base path")->required();
  s_co->add_option("--energy-kev", co.energy_kev, "Energy (must be in the table)")->capture_default_str();
  s_co->add_option("--noise-sigma", co.noise_sigma, "Gaussian noise sigma, cm^-1")->capture_default_str();
  s_co->add_option("--seed", co.seed, "Noise seed")->capture_default_str();
  s_co->add_option("--dose-cc", co.dose_cc, "Dose recorded in the sidecar")->capture_default_str();
  s_co->add_option("--reference-cc", co.reference_cc, "Reference dose")->capture_default_str();
  s_co->add_option("--out", co.out, "Output base path")->required();
  add_manifest(s_co);

  // decompose
  DecomposeArgs de;
  auto* s_de = app.add_subcommand("decompose", "Three-material decomposition of an image pair");
  s_de->add_option("--low", de.low, "Low-energy image base path")->required();
  s_de->add_option("--high", de.high, "High-energy image base path")->required();
  s_de->add_option("--clamp-policy", de.clamp, "clamp-renormalize or raw")->capture_default_str();
  s_de->add_option("--out", de.out, "Output fraction map base path")->required();
  add_manifest(s_de);

  // simulate-dose
  SimulateArgs si;
  auto* s_si = app.add_subcommand("simulate-dose", "Simulate a reduced-contrast image pair");
  s_si->add_option("--fractions", si.fractions, "Full-dose fraction map base path")->required();
  s_si->add_option("--dose-cc", si.dose_cc, "Contrast dose, cc")->capture_default_str();
  s_si->add_option("--reference-cc", si.reference_cc, "Reference dose, cc")->capture_default_str();
  s_si->add_option("--noise-sigma", si.noise_sigma, "Gaussian noise sigma, cm^-1")->capture_default_str();
  s_si->add_option("--seed", si.seed, "Noise seed")->capture_default_str();
  s_si->add_option("--out-low", si.out_low, "Low-energy output base path")->required();
  s_si->add_option("--out-high", si.out_high, "High-energy output base path")->required();
  add_manifest(s_si);

  // enhance-mde
  MdeArgs md;
  auto* s_md = app.add_subcommand("enhance-mde", "Material-decomposition enhancement baseline");
  s_md->add_option("--low", md.low, "Low-energy low-dose image")->required();
  s_md->add_option("--high", md.high, "High-energy low-dose image")->required();
  s_md->add_option("--clamp-policy", md.clamp, "clamp-renormalize or raw")->capture_default_str();
  s_md->add_option("--overflow", md.overflow, "error or saturate")->capture_default_str();
  s_md->add_option("--out-low", md.out_low, "Low-energy output base path")->required();
  s_md->add_option("--out-high", md.out_high, "High-energy output base path")->required();
  add_manifest(s_md);

  // train-ddpm
  TrainArgs tr;
  dl_train_config_default(&tr.config);
  auto* s_tr = app.add_subcommand("train-ddpm", "Train the patch denoiser on (target, condition) pairs");
  s_tr->add_option("--target", tr.targets, "Full-dose image base path (repeatable)")->required();
  s_tr->add_option("--condition", tr.conditions, "Low-dose image base path (repeatable, same order)")->required();
  s_tr->add_option("--steps", tr.schedule.steps, "Diffusion steps T")->capture_default_str();
  s_tr->add_option("--beta-start", tr.schedule.beta_start, "beta_1")->capture_default_str();
  s_tr->add_option("--beta-end", tr.schedule.beta_end, "beta_T")->capture_default_str();
  s_tr->add_option("--epochs", tr.config.epochs)->capture_default_str();
  s_tr->add_option("--batch-size", tr.config.batch_size)->capture_default_str();
  s_tr->add_option("--learning-rate", tr.config.learning_rate)->capture_default_str();
  s_tr->add_option("--patch", tr.config.patch, "Patch side")->capture_default_str();
  s_tr->add_option("--hidden", tr.config.hidden, "Hidden width")->capture_default_str();
  s_tr->add_option("--patch-stride", tr.config.patch_stride)->capture_default_str();
  s_tr->add_option("--report-every", tr.config.report_every, "Progress cadence in epochs")->capture_default_str();
  s_tr->add_option("--optimizer", tr.optimizer, "adam or sgd")->capture_default_str();
  s_tr->add_option("--seed", tr.config.seed, "Training seed")->capture_default_str();
  s_tr->add_option("--out", tr.out, "Model base path")->required();
  s_tr->add_option("--loss-csv", tr.loss_csv, "Loss trace CSV (default: <out>_loss.csv)");
  add_manifest(s_tr);

  // enhance-ddpm
  EnhanceDdpmArgs ed;
  auto* s_ed = app.add_subcommand("enhance-ddpm", "Enhance a low-dose image with a trained model");
  s_ed->add_option("--model", ed.model, "Model base path")->required();
  s_ed->add_option("--input", ed.input, "Low-dose image base path")->required();
  s_ed->add_option("--seed", ed.seed, "Sampling seed")->capture_default_str();
  s_ed->add_option("--out", ed.out, "Output base path")->required();
  add_manifest(s_ed);

  // evaluate
  EvaluateArgs ev;
  double ev_dose = 0.0, ev_hole = 0.0;
  auto* s_ev = app.add_subcommand("evaluate", "Score an image pair against the noiseless full-dose truth");
  s_ev->add_option("--truth", ev.truth, "Ground-truth fraction map base path")->required();
  s_ev->add_option("--low", ev.low, "Low-energy image to score")->required();
  s_ev->add_option("--high", ev.high, "High-energy image to score")->required();
  s_ev->add_option("--method", ev.method, "Method label")->capture_default_str();
  s_ev->add_option("--phantom-id", ev.phantom_id, "Row key (default: truth file name)");
  auto* o_dose = s_ev->add_option("--dose-cc", ev_dose, "Dose key (default: from the low image)");
  s_ev->add_option("--seed", ev.seed, "Seed key")->capture_default_str();
  s_ev->add_option("--data-range", ev.data_range)->capture_default_str();
  s_ev->add_option("--ssim-window", ev.ssim_window)->capture_default_str();
  s_ev->add_option("--mask-threshold", ev.mask_threshold, "Vessel mask iodine threshold")->capture_default_str();
  auto* o_hole = s_ev->add_option("--hole-threshold", ev_hole, "Hole iodine threshold (default: half the peak)");
  s_ev->add_option("--clamp-policy", ev.clamp)->capture_default_str();
  s_ev->add_option("--csv", ev.csv, "Metrics CSV (created or appended)")->required();
  add_manifest(s_ev);

  // export-pgm
  std::string px_in, px_out;
  double px_lo = 0.0, px_hi = 0.0;
  auto* s_px = app.add_subcommand("export-pgm", "Write an image as 8-bit PGM");
  s_px->add_option("--input", px_in, "Image base path")->required();
  s_px->add_option("--out", px_out, "PGM path")->required();
  s_px->add_option("--lo", px_lo, "Window low (default: image min)");
  s_px->add_option("--hi", px_hi, "Window high (default: image max)");
  add_manifest(s_px);

  // run-all
  std::string ra_config;
  std::vector<double> ra_dose;
  double ra_ref = 0.0, ra_sigma = 0.0;
  uint64_t ra_seed = 0;
  std::vector<std::string> ra_methods;
  std::string ra_out;
  int ra_epochs = 0;
  auto* s_ra = app.add_subcommand("run-all", "Full pipeline: phantoms, dose ladder, training, enhancement, metrics");
  s_ra->add_option("--config", ra_config, "Experiment config JSON")->check(CLI::ExistingFile);
  auto* o_rdose = s_ra->add_option("--dose-cc", ra_dose, "Dose ladder override (repeatable)");
  auto* o_rref = s_ra->add_option("--reference-cc", ra_ref, "Reference dose override");
  auto* o_rsig = s_ra->add_option("--noise-sigma", ra_sigma, "Noise sigma override");
  auto* o_rseed = s_ra->add_option("--seed", ra_seed, "Master seed override");
  auto* o_rmeth = s_ra->add_option("--methods", ra_methods, "Method list override (mde, ddpm)");
  auto* o_rout = s_ra->add_option("--output-dir", ra_out, "Output directory override");
  auto* o_repo = s_ra->add_option("--epochs", ra_epochs, "Training epochs override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (s_pg->parsed()) {
      if (pg_random == !pg.spec_path.empty()) throw CliError("phantom-gen: give exactly one of --spec or --random");
      Manifest m("phantom-gen");
      stage_phantom_gen(pg, m);
      m.write(manifest.empty() ? default_manifest(pg.out) : manifest);
    } else if (s_co->parsed()) {
      Manifest m("compose");
      stage_compose(co, m);
      m.write(manifest.empty() ? default_manifest(co.out) : manifest);
    } else if (s_de->parsed()) {
      Manifest m("decompose");
      stage_decompose(de, m);
      m.write(manifest.empty() ? default_manifest(de.out) : manifest);
    } else if (s_si->parsed()) {
      Manifest m("simulate-dose");
      stage_simulate(si, m);
      m.write(manifest.empty() ? default_manifest(si.out_low) : manifest);
    } else if (s_md->parsed()) {
      Manifest m("enhance-mde");
      stage_mde(md, m);
      m.write(manifest.empty() ? default_manifest(md.out_low) : manifest);
    } else if (s_tr->parsed()) {
      Manifest m("train-ddpm");
      stage_train(tr, m);
      m.write(manifest.empty() ? default_manifest(tr.out) : manifest);
    } else if (s_ed->parsed()) {
      Manifest m("enhance-ddpm");
      stage_enhance_ddpm(ed, m);
      m.write(manifest.empty() ? default_manifest(ed.out) : manifest);
    } else if (s_ev->parsed()) {
      if (o_dose->count()) ev.dose_cc = ev_dose;
      if (o_hole->count()) ev.hole_threshold = ev_hole;
      Manifest m("evaluate");
      stage_evaluate(ev, m);
      m.write(manifest.empty() ? default_manifest(ev.csv) : manifest);
    } else if (s_px->parsed()) {
      Image img = load_image(px_in);
      ensure_parent(px_out);
      check(dl_image_export_pgm(img.get(), px_out.c_str(), px_lo, px_hi), px_out);
      Manifest m("export-pgm");
      m.inputs(stored_files(px_in));
      m.output(px_out);
      m.parameters = {{"lo", px_lo}, {"hi", px_hi}};
      m.write(manifest.empty() ? default_manifest(px_out) : manifest);
    } else if (s_ra->parsed()) {
      RunConfig c = load_run_config(ra_config);
      if (o_rdose->count()) c.dose_ladder_cc = ra_dose;
      if (o_rref->count()) c.reference_cc = ra_ref;
      if (o_rsig->count()) c.noise_sigma = ra_sigma;
      if (o_rseed->count()) c.seed = ra_seed;
      if (o_rmeth->count()) c.methods = ra_methods;
      if (o_rout->count()) c.output_dir = ra_out;
      if (o_repo->count()) c.train.epochs = ra_epochs;
      validate_run_config(c, ra_config.empty() ? "run-all" : ra_config);
      return run_all(c);
    }
  } catch (const CliError& e) {
    std::cerr << "dectlab-cli: error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "dectlab-cli: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
