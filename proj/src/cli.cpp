#include "slicelift/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "slicelift/detections.hpp"
#include "slicelift/error.hpp"
#include "slicelift/evaluation.hpp"
#include "slicelift/groundtruth.hpp"
#include "slicelift/lifting.hpp"
#include "slicelift/phantom.hpp"
#include "slicelift/preprocess.hpp"
#include "slicelift/volume.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace slicelift::cli {

std::string CaseLayout::scan_id() const {
  fs::path p = fs::weakly_canonical(fs::absolute(root));
  if (p.filename().empty()) {
    p = p.parent_path();
  }
  return p.filename().string();
}

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every knob of the pipeline, whichever subcommand is running.
struct Settings {
  LiftParams lift;
  ParseOptions parse;
  EqualizationParams eq;
  std::vector<float> window;
  GtOptions gt;
  int connectivity = 26;
  EvalOptions eval;
  bool kidney_slices = false;
  int jobs = 0;

  // Folds flag values that need translation into the library structs.
  void finalize() {
    if (!window.empty()) {
      eq.window = IntensityWindow{window[0], window[1]};
    }
    if (connectivity != 6 && connectivity != 26) {
      throw UsageError("--connectivity must be 6 or 26");
    }
    gt.connectivity = connectivity == 6 ? Connectivity::kFace : Connectivity::kFull;
    eval.averaging = kidney_slices ? SliceAveraging::kPerKidneySlice : SliceAveraging::kPerGtBox;
    lift.validate();
    eq.validate();
    if (!(parse.min_score >= 0.0 && parse.min_score <= 1.0)) {
      throw UsageError("--min-score must lie in [0, 1]");
    }
    if (gt.min_voxels < 1) {
      throw UsageError("--min-voxels must be >= 1");
    }
  }

  json params() const {
    json p = lift.to_json();
    p["min_score"] = parse.min_score;
    p["strict"] = parse.strict;
    p["bins"] = eq.bins;
    if (eq.window) {
      p["window"] = {eq.window->lo, eq.window->hi};
    } else {
      p["window"] = nullptr;
    }
    const json gt_params = to_json(gt);
    for (const auto& [key, value] : gt_params.items()) {
      p[key] = value;
    }
    return p;
  }
};

void add_lift_flags(CLI::App* app, Settings& s) {
  app->add_option("--tau-link", s.lift.tau_link, "IoU needed to link adjacent slices")->capture_default_str();
  app->add_option("--max-gap", s.lift.max_gap, "missed slices a track may bridge")->capture_default_str();
  app->add_option("--min-len", s.lift.min_len, "slices needed to emit a 3D box")->capture_default_str();
  app->add_option("--tau-nms2d", s.lift.tau_nms2d, "per-slice NMS IoU threshold")->capture_default_str();
  app->add_option("--tau-nms3d", s.lift.tau_nms3d, "3D NMS IoU threshold")->capture_default_str();
}

void add_parse_flags(CLI::App* app, Settings& s) {
  app->add_option("--min-score", s.parse.min_score, "discard detections scoring below this")->capture_default_str();
  app->add_flag("--strict", s.parse.strict, "reject out-of-image or malformed boxes");
}

void add_eq_flags(CLI::App* app, Settings& s) {
  app->add_option("--bins", s.eq.bins, "histogram bins")->capture_default_str();
  app->add_option("--window", s.window, "clamp intensities to lo,hi before equalizing")
      ->delimiter(',')
      ->expected(2);
}

void add_gt_flags(CLI::App* app, Settings& s) {
  app->add_option("--labels", s.gt.foreground, "foreground labels (default: every label >= 1)")->delimiter(',');
  app->add_option("--connectivity", s.connectivity, "6 or 26")->capture_default_str();
  app->add_option("--min-voxels", s.gt.min_voxels, "smallest component kept")->capture_default_str();
}

void add_jobs_flag(CLI::App* app, Settings& s) {
  app->add_option("-j,--jobs", s.jobs, std::string("parallel cases (default: $") + kJobsEnv + " or 1)")
      ->check(CLI::PositiveNumber);
}

int resolve_jobs(int flag) {
  if (flag > 0) {
    return flag;
  }
  if (flag < 0) {
    throw UsageError("--jobs must be >= 1");
  }
  const char* env = std::getenv(kJobsEnv);
  if (env == nullptr || *env == '\0') {
    return 1;
  }
  int value = 0;
  const char* end = env + std::char_traits<char>::length(env);
  const auto [ptr, ec] = std::from_chars(env, end, value);
  if (ec != std::errc() || ptr != end || value < 1) {
    throw UsageError(std::string(kJobsEnv) + " must be a positive integer, got \"" + env + "\"");
  }
  return value;
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) {
    throw IoFailure("missing " + path.string());
  }
}

CaseLayout open_case(const std::string& dir) {
  CaseLayout c{dir};
  if (!fs::is_directory(c.root)) {
    throw IoFailure("case directory not found: " + dir);
  }
  return c;
}

// Runs fn over every case, `jobs` at a time. Output lines are printed in
// case order once all cases finish; failures are reported per case.
int for_each_case(const std::vector<std::string>& cases, int jobs, std::ostream& out, std::ostream& err,
                  const std::function<std::string(std::size_t, const CaseLayout&)>& fn) {
  const std::size_t n = cases.size();
  std::vector<std::string> messages(n);
  std::vector<std::optional<std::string>> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        messages[i] = fn(i, open_case(cases[i]));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back(worker);
    }
  }
  bool failed = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      err << "error: " << cases[i] << ": " << *errors[i] << "\n";
      failed = true;
    } else if (!messages[i].empty()) {
      out << messages[i] << "\n";
    }
  }
  return failed ? kExitData : kExitOk;
}

ParseResult load_detections(const CaseLayout& c, const ParseOptions& options) {
  require_file(c.detections());
  try {
    return read_detections(c.detections(), options);
  } catch (const SchemaViolation& e) {
    throw SchemaViolation(c.detections().string() + ": " + e.what());
  }
}

std::vector<GtObject> load_gt(const CaseLayout& c, const GtOptions& options) {
  require_file(c.segmentation());
  return extract_gt(read_label_nifti(c.segmentation()), options);
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

// ---- subcommands ----------------------------------------------------------

void cmd_info(const std::string& target, bool as_json, std::ostream& out) {
  fs::path path = target;
  if (fs::is_directory(path)) {
    path = CaseLayout{path}.imaging();
  }
  require_file(path);
  const NiftiHeader h = read_nifti_header(path);
  const Dims d = h.dims();
  const Spacing sp = h.spacing();
  if (as_json) {
    json doc = {{"file", path.string()},
                {"byte_order", h.byte_order == ByteOrder::kLittle ? "little" : "big"},
                {"gzip", h.gzipped},
                {"datatype", to_string(h.datatype)},
                {"datatype_code", static_cast<int>(h.datatype)},
                {"bitpix", h.bitpix},
                {"dims", {d.nx, d.ny, d.nz}},
                {"spacing", {sp[0], sp[1], sp[2]}},
                {"vox_offset", h.vox_offset},
                {"scl_slope", h.scl_slope},
                {"scl_inter", h.scl_inter},
                {"qform_code", h.qform_code},
                {"sform_code", h.sform_code},
                {"descrip", h.descrip}};
    out << doc.dump(2) << "\n";
    return;
  }
  out << "file:        " << path.string() << "\n"
      << "byte order:  " << (h.byte_order == ByteOrder::kLittle ? "little" : "big") << "\n"
      << "gzip:        " << (h.gzipped ? "yes" : "no") << "\n"
      << "datatype:    " << to_string(h.datatype) << " (" << static_cast<int>(h.datatype) << ")\n"
      << "bitpix:      " << h.bitpix << "\n"
      << "dims:        " << d.nx << " x " << d.ny << " x " << d.nz << "\n"
      << "spacing:     " << fmt(sp[0]) << " x " << fmt(sp[1]) << " x " << fmt(sp[2]) << "\n"
      << "vox_offset:  " << fmt(h.vox_offset) << "\n"
      << "scl_slope:   " << fmt(h.scl_slope) << "\n"
      << "scl_inter:   " << fmt(h.scl_inter) << "\n"
      << "qform_code:  " << h.qform_code << "\n"
      << "sform_code:  " << h.sform_code << "\n"
      << "descrip:     " << h.descrip << "\n";
}

std::string cmd_preprocess(const CaseLayout& c, const Settings& s) {
  require_file(c.imaging());
  const Volume volume = read_nifti(c.imaging());
  const std::vector<Image8> slices = preprocess_volume(volume, s.eq);
  const fs::path dir = c.derived() / "slices";
  fs::create_directories(dir);
  const std::string id = c.scan_id();
  json files = json::array();
  for (std::size_t z = 0; z < slices.size(); ++z) {
    const std::string name = slice_filename(id, static_cast<int>(z));
    write_pgm(slices[z], dir / name);
    files.push_back(name);
  }
  write_json_file({{"scan_id", id},
                   {"nx", volume.dims().nx},
                   {"ny", volume.dims().ny},
                   {"num_slices", volume.dims().nz},
                   {"files", std::move(files)},
                   {"params", s.params()}},
                  dir / "index.json");
  return id + ": wrote " + std::to_string(slices.size()) + " slices to " + dir.string();
}

std::string cmd_gt_extract(const CaseLayout& c, const Settings& s) {
  require_file(c.segmentation());
  const LabelVolume labels = read_label_nifti(c.segmentation());
  const std::vector<GtObject> objects = extract_gt(labels, s.gt);
  fs::create_directories(c.derived());
  const std::string id = c.scan_id();
  write_json_file(gt2d_to_json(id, labels.dims(), objects, s.params()), c.derived() / "gt2d.json");
  write_json_file(gt3d_to_json(id, objects, s.params()), c.derived() / "gt3d.json");
  return id + ": " + std::to_string(objects.size()) + " objects";
}

std::string cmd_lift(const CaseLayout& c, const Settings& s) {
  const ParseResult parsed = load_detections(c, s.parse);
  const std::vector<Box3D> boxes = lift(parsed.set, s.lift);
  fs::create_directories(c.derived());
  const std::string id = c.scan_id();
  json params = s.params();
  params["dropped_out_of_bounds"] = parsed.dropped_out_of_bounds;
  params["dropped_low_score"] = parsed.dropped_low_score;
  write_json_file(boxes3d_to_json(parsed.set.scan_id, boxes, params), c.derived() / "boxes3d.json");
  return id + ": " + std::to_string(boxes.size()) + " boxes from " + std::to_string(parsed.set.boxes.size()) +
         " detections";
}

json eval_params(const Settings& s) {
  json p = s.params();
  const json eval_extra = s.eval.to_json();
  for (const auto& [key, value] : eval_extra.items()) {
    p[key] = value;
  }
  return p;
}

ScanMetrics evaluate_case(const CaseLayout& c, const Settings& s) {
  // Report the detections file first: it is the input most often absent.
  require_file(c.detections());
  require_file(c.segmentation());
  const std::string id = c.scan_id();
  const std::vector<GtObject> gt = load_gt(c, s.gt);
  const ParseResult parsed = load_detections(c, s.parse);
  const DetectionSet pred2d = nms_per_slice(parsed.set, s.lift.tau_nms2d);
  const std::vector<Box3D> pred3d = lift(parsed.set, s.lift);
  return score_scan(id, gt, pred2d, pred3d, s.eval);
}

void write_report(const EvalReport& report, const fs::path& dir, bool csv) {
  fs::create_directories(dir);
  write_json_file(report_to_json(report), dir / "eval.json");
  const EvalReport one[] = {report};
  std::ofstream(dir / "eval.txt", std::ios::binary | std::ios::trunc) << format_table(one);
  if (csv) {
    std::ofstream(dir / "eval.csv", std::ios::binary | std::ios::trunc) << report_to_csv(report);
  }
}

int cmd_eval(const std::vector<std::string>& cases, const Settings& s, const std::string& set_name,
             const std::string& out_dir, bool csv, std::ostream& out, std::ostream& err) {
  std::vector<std::optional<ScanMetrics>> metrics(cases.size());
  const json params = eval_params(s);
  const int code = for_each_case(cases, resolve_jobs(s.jobs), out, err, [&](std::size_t i, const CaseLayout& c) {
    ScanMetrics m = evaluate_case(c, s);
    const ScanMetrics one[] = {m};
    write_report(aggregate(one, set_name, params), c.derived(), csv);
    metrics[i] = std::move(m);
    return std::string();
  });
  if (code != kExitOk) {
    return code;
  }
  std::vector<ScanMetrics> ok;
  for (const auto& m : metrics) {
    ok.push_back(*m);
  }
  const EvalReport report = aggregate(ok, set_name, params);
  if (!out_dir.empty()) {
    write_report(report, out_dir, csv);
  }
  const EvalReport reports[] = {report};
  out << format_table(reports);
  return kExitOk;
}

struct PhantomFlags {
  std::uint64_t seed = 0;
  std::vector<double> drift{0.0, 0.0};
  double noise_sigma = 20.0;
  std::string layout = "standard";
  NoiseSpec noise;
  std::vector<double> score_range{0.5, 1.0};
};

std::string cmd_phantom(const std::string& dir, const PhantomFlags& f, const Settings& s) {
  const std::array<double, 2> drift{f.drift[0], f.drift[1]};
  PhantomSpec spec = f.layout == "misaligned" ? misaligned_phantom(drift, f.seed) : standard_phantom(drift, f.seed);
  spec.noise_sigma = f.noise_sigma;
  NoiseSpec noise = f.noise;
  noise.seed = f.seed;
  noise.score_range = {f.score_range[0], f.score_range[1]};
  noise.validate();

  const Phantom phantom = generate_phantom(spec);
  const CaseLayout c{dir};
  fs::create_directories(c.derived());
  const std::string id = c.scan_id();

  WriteOptions label_opts;
  label_opts.dtype = Datatype::kUint8;
  write_nifti(phantom.image, c.imaging());
  write_nifti(phantom.labels, c.segmentation(), label_opts);

  const std::vector<GtObject> gt = extract_gt(phantom.labels, s.gt);
  const DetectionSet detections = simulate_detections(gt, noise, spec.dims, id);

  json params = s.params();
  params["phantom"] = {{"layout", f.layout},
                       {"seed", f.seed},
                       {"drift", {drift[0], drift[1]}},
                       {"noise_sigma", spec.noise_sigma}};
  params["noise"] = noise.to_json();
  write_detections(detections, c.detections(), params);
  write_json_file(gt2d_to_json(id, spec.dims, gt, params), c.derived() / "gt2d.json");
  write_json_file(gt3d_to_json(id, gt, params), c.derived() / "gt3d.json");
  return id + ": " + std::to_string(gt.size()) + " objects, " + std::to_string(detections.boxes.size()) +
         " detections";
}

std::string cmd_render(const CaseLayout& c, int z, const std::string& source, const Settings& s) {
  require_file(c.imaging());
  const Volume volume = read_nifti(c.imaging());
  if (z < 0 || z >= volume.dims().nz) {
    throw IndexOutOfRange("slice " + std::to_string(z) + " outside [0, " + std::to_string(volume.dims().nz) + ")");
  }
  const Image8 image = equalize_slice(extract_slice(volume, z), s.eq);

  std::vector<Box2D> gt;
  if (fs::is_regular_file(c.segmentation())) {
    for (const GtObject& o : load_gt(c, s.gt)) {
      if (const auto it = o.slice_boxes.find(z); it != o.slice_boxes.end()) {
        gt.push_back(it->second);
      }
    }
  }
  std::vector<Box2D> pred;
  if (source == "boxes3d") {
    const fs::path path = c.derived() / "boxes3d.json";
    require_file(path);
    for (const Box3D& b : boxes3d_from_json(json::parse(read_text_file(path)))) {
      if (z >= b.z_min() && z < b.z_max()) {
        pred.push_back(slice_of(b, z));
      }
    }
  } else if (fs::is_regular_file(c.detections())) {
    for (const Box2D& b : load_detections(c, s.parse).set.boxes) {
      if (b.z() == z) {
        pred.push_back(b);
      }
    }
  }
  fs::create_directories(c.derived());
  const fs::path path = c.derived() / ("overlay_z" + std::to_string(z) + ".ppm");
  render_overlay(image, gt, pred, path);
  return c.scan_id() + ": wrote " + path.string() + " (" + std::to_string(gt.size()) + " gt, " +
         std::to_string(pred.size()) + " predicted)";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Slice-wise 2D detections to 3D boxes: preprocessing, lifting and evaluation", "slicelift"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  Settings s;
  std::vector<std::string> cases;

  auto* info = app.add_subcommand("info", "dump a NIfTI header");
  std::string info_target;
  bool info_json = false;
  info->add_option("path", info_target, "NIfTI file or case directory")->required();
  info->add_flag("--json", info_json, "print JSON");

  auto* preprocess = app.add_subcommand("preprocess", "equalize every slice to derived/slices/*.pgm");
  preprocess->add_option("cases", cases, "case directories")->required();
  add_eq_flags(preprocess, s);
  add_jobs_flag(preprocess, s);

  auto* gt_extract = app.add_subcommand("gt-extract", "derive GT boxes from segmentation.nii.gz");
  gt_extract->add_option("cases", cases, "case directories")->required();
  add_gt_flags(gt_extract, s);
  add_jobs_flag(gt_extract, s);

  auto* lift_cmd = app.add_subcommand("lift", "lift detections.json to derived/boxes3d.json");
  lift_cmd->add_option("cases", cases, "case directories")->required();
  add_lift_flags(lift_cmd, s);
  add_parse_flags(lift_cmd, s);
  add_jobs_flag(lift_cmd, s);

  auto* eval = app.add_subcommand("eval", "score detections against the segmentation");
  std::string set_name = "All scans";
  std::string out_dir;
  bool csv = false;
  eval->add_option("cases", cases, "case directories")->required();
  eval->add_option("--set-name", set_name, "label of the aggregate row")->capture_default_str();
  eval->add_option("--out", out_dir, "also write the set report to this directory");
  eval->add_flag("--csv", csv, "also write eval.csv");
  eval->add_flag("--kidney-slices", s.kidney_slices, "average 2D scores per slice containing GT");
  eval->add_option("--tp-iou", s.eval.tp_iou, "IoU for a true positive")->capture_default_str();
  eval->add_option("--class-id", s.eval.class_id, "class to score")->capture_default_str();
  add_lift_flags(eval, s);
  add_parse_flags(eval, s);
  add_gt_flags(eval, s);
  add_jobs_flag(eval, s);

  auto* phantom = app.add_subcommand("phantom", "write a synthetic case");
  PhantomFlags pf;
  std::string phantom_dir;
  phantom->add_option("dir", phantom_dir, "case directory to create")->required();
  phantom->add_option("--seed", pf.seed, "RNG seed")->capture_default_str();
  phantom->add_option("--drift", pf.drift, "in-plane drift dx,dy in px/slice")->delimiter(',')->expected(2);
  phantom->add_option("--jitter", pf.noise.jitter_sigma, "box edge jitter sigma (px)")->capture_default_str();
  phantom->add_option("--p-drop", pf.noise.p_drop, "per-slice box drop probability")->capture_default_str();
  phantom->add_option("--fp-rate", pf.noise.fp_rate, "false positives per slice")->capture_default_str();
  phantom->add_option("--score-range", pf.score_range, "detection scores lo,hi")->delimiter(',')->expected(2);
  phantom->add_option("--noise-sigma", pf.noise_sigma, "intensity noise sigma")->capture_default_str();
  phantom->add_option("--layout", pf.layout, "standard or misaligned")
      ->check(CLI::IsMember({"standard", "misaligned"}))
      ->capture_default_str();
  add_gt_flags(phantom, s);

  auto* render = app.add_subcommand("render", "draw GT and predicted boxes on one slice");
  int render_z = 0;
  std::string source = "detections";
  render->add_option("cases", cases, "case directories")->required();
  render->add_option("--z", render_z, "slice index")->required();
  render->add_option("--source", source, "detections or boxes3d")
      ->check(CLI::IsMember({"detections", "boxes3d"}))
      ->capture_default_str();
  add_eq_flags(render, s);
  add_parse_flags(render, s);
  add_gt_flags(render, s);
  add_jobs_flag(render, s);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    s.finalize();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (info->parsed()) {
      cmd_info(info_target, info_json, out);
      return kExitOk;
    }
    if (phantom->parsed()) {
      out << cmd_phantom(phantom_dir, pf, s) << "\n";
      return kExitOk;
    }
    if (eval->parsed()) {
      return cmd_eval(cases, s, set_name, out_dir, csv, out, err);
    }
    const int jobs = resolve_jobs(s.jobs);
    if (preprocess->parsed()) {
      return for_each_case(cases, jobs, out, err, [&](std::size_t, const CaseLayout& c) { return cmd_preprocess(c, s); });
    }
    if (gt_extract->parsed()) {
      return for_each_case(cases, jobs, out, err, [&](std::size_t, const CaseLayout& c) { return cmd_gt_extract(c, s); });
    }
    if (lift_cmd->parsed()) {
      return for_each_case(cases, jobs, out, err, [&](std::size_t, const CaseLayout& c) { return cmd_lift(c, s); });
    }
    if (render->parsed()) {
      return for_each_case(cases, jobs, out, err,
                           [&](std::size_t, const CaseLayout& c) { return cmd_render(c, render_z, source, s); });
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << "usage error: no subcommand\n";
  return kExitUsage;
}

}  // namespace slicelift::cli
