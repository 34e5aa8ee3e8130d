#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "srzoo/srzoo.hpp"

namespace {

std::pair<int64_t, int64_t> parse_size(const std::string& s) {
  long long h = 0, w = 0;
  char tail = 0;
  const int n = std::sscanf(s.c_str(), "%lldx%lld%c", &h, &w, &tail);
  if (n != 2 || h <= 0 || w <= 0)
    throw CLI::ValidationError("--input-size", "expected HxW with positive sides, got '" + s + "'");
  return {h, w};
}

// A model argument names a registry entry or points at a spec file.
srzoo::GraphIR load_graph_arg(const std::string& arg) {
  namespace fs = std::filesystem;
  if (arg.size() > 5 && arg.substr(arg.size() - 5) == ".json") return srzoo::load_model_spec(arg);
  if (fs::is_regular_file(arg)) return srzoo::load_model_spec(arg);
  return srzoo::build_model(arg);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string db_string(double v) { return std::isinf(v) ? "inf" : fixed(v, 4); }

std::string emit_analysis(const srzoo::EfficiencyReport& r, const std::string& format) {
  const std::vector<std::pair<std::string, std::string>> cols = {
      {"model", r.model},
      {"input_h", std::to_string(r.input_h)},
      {"input_w", std::to_string(r.input_w)},
      {"params", std::to_string(r.params)},
      {"conv_layers", std::to_string(r.conv_layers)},
      {"flops", std::to_string(r.flops)},
      {"activations", std::to_string(r.activations)},
      {"peak_memory_bytes", std::to_string(r.peak_memory_bytes)},
      {"flops_G", fixed(static_cast<double>(r.flops) / 1e9, 2)},
      {"activations_M", fixed(static_cast<double>(r.activations) / 1e6, 2)},
      {"memory_MiB", fixed(static_cast<double>(r.peak_memory_bytes) / (1024.0 * 1024.0), 2)},
  };
  std::string out;
  if (format == "text") {
    for (const auto& [k, v] : cols) out += k + " " + v + "\n";
  } else if (format == "csv") {
    for (size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i].first;
    out += "\n";
    for (size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i].second;
    out += "\n";
  } else if (format == "md") {
    std::string sep;
    for (const auto& [k, v] : cols) {
      out += "| " + k + " ";
      sep += "|---";
    }
    out += "|\n" + sep + "|\n";
    for (const auto& [k, v] : cols) out += "| " + v + " ";
    out += "|\n";
  } else if (format == "json") {
    nlohmann::json j;
    for (const auto& [k, v] : cols) {
      if (k == "model")
        j[k] = v;
      else if (v.find('.') != std::string::npos)
        j[k] = std::stod(v);
      else
        j[k] = std::stoll(v);
    }
    out = j.dump(2) + "\n";
  } else {
    throw srzoo::DataError("unknown format '" + format + "'");
  }
  return out;
}

std::vector<srzoo::Tensor> load_dir_images(const std::string& dir) {
  std::vector<srzoo::Tensor> images;
  for (const auto& name : srzoo::list_pngs(dir)) images.push_back(srzoo::read_png(dir + "/" + name));
  if (images.empty()) throw srzoo::DataError("no .png files in '" + dir + "'");
  return images;
}

void save_bundle(srzoo::GraphIR& g, const std::string& prefix, srzoo::Dtype dtype) {
  srzoo::save_model_spec(g, prefix + ".spec.json");
  srzoo::save_weights(g, prefix + ".wts", dtype);
  std::cout << "wrote " << prefix << ".spec.json\n";
  std::cout << "wrote " << prefix << ".wts\n";
}

srzoo::Dtype dtype_flag(const std::string& s) { return srzoo::dtype_from_name(s); }

int run(CLI::App& app, int argc, char** argv) {
  app.require_subcommand(1);

  auto* cmd_list = app.add_subcommand("list-models", "List the built-in model zoo");

  auto* cmd_analyze =
      app.add_subcommand("analyze", "Report params, FLOPs, activations, and memory");
  std::string an_model, an_size = "256x256", an_format = "text";
  cmd_analyze->add_option("model", an_model, "model name or spec file")->required();
  cmd_analyze->add_option("--input-size", an_size, "input size as HxW (default 256x256)");
  cmd_analyze->add_option("--format", an_format, "text|csv|json|md")
      ->check(CLI::IsMember({"text", "csv", "json", "md"}));

  auto* cmd_bench = app.add_subcommand("bench", "Time model inference over an image directory");
  std::string be_model, be_images;
  int be_trials = 3, be_warmup = 1, be_threads = 1;
  cmd_bench->add_option("model", be_model, "model name or spec file")->required();
  cmd_bench->add_option("--images", be_images, "directory of .png inputs")->required();
  cmd_bench->add_option("--trials", be_trials, "timed trials (best is reported)");
  cmd_bench->add_option("--warmup", be_warmup, "untimed warmup runs");
  cmd_bench->add_option("--threads", be_threads, "convolution threads");

  auto* cmd_psnr = app.add_subcommand("psnr", "Mean PSNR between two image directories");
  std::string ps_sr, ps_gt;
  int64_t ps_shave = 4;
  cmd_psnr->add_option("--sr", ps_sr, "directory of reconstructed images")->required();
  cmd_psnr->add_option("--gt", ps_gt, "directory of ground-truth images")->required();
  cmd_psnr->add_option("--shave", ps_shave, "border pixels to ignore");

  auto* cmd_eval = app.add_subcommand("eval", "Run a model over LR inputs and score against GT");
  std::string ev_model, ev_weights, ev_lr, ev_gt;
  int64_t ev_shave = 4;
  int ev_threads = 1;
  cmd_eval->add_option("model", ev_model, "model name or spec file")->required();
  cmd_eval->add_option("--weights", ev_weights, "weight file")->required();
  cmd_eval->add_option("--lr", ev_lr, "directory of low-resolution inputs")->required();
  cmd_eval->add_option("--gt", ev_gt, "directory of ground-truth images")->required();
  cmd_eval->add_option("--shave", ev_shave, "border pixels to ignore");
  cmd_eval->add_option("--threads", ev_threads, "convolution threads");

  auto* cmd_makelr = app.add_subcommand("make-lr", "Bicubic-downsample a directory of images");
  std::string ml_hr, ml_out, ml_gt_out;
  int64_t ml_factor = 4;
  cmd_makelr->add_option("--hr", ml_hr, "directory of high-resolution images")->required();
  cmd_makelr->add_option("--out", ml_out, "output directory for LR images")->required();
  cmd_makelr->add_option("--factor", ml_factor, "downsampling factor");
  cmd_makelr->add_option("--gt-out", ml_gt_out, "also write the center-cropped ground truth");

  auto* cmd_fuse = app.add_subcommand("fuse-cac", "Fold asymmetric conv branches into 3x3 convs");
  std::string fu_spec, fu_weights, fu_out, fu_dtype = "f32";
  cmd_fuse->add_option("spec", fu_spec, "model spec file")->required();
  cmd_fuse->add_option("weights", fu_weights, "weight file")->required();
  cmd_fuse->add_option("--out", fu_out, "output prefix")->required();
  cmd_fuse->add_option("--dtype", fu_dtype, "f32|f64")->check(CLI::IsMember({"f32", "f64"}));

  auto* cmd_prune = app.add_subcommand("prune", "Fold channel gates and drop zeroed channels");
  std::string pr_spec, pr_weights, pr_gates, pr_out, pr_dtype = "f32";
  cmd_prune->add_option("spec", pr_spec, "model spec file")->required();
  cmd_prune->add_option("weights", pr_weights, "weight file")->required();
  cmd_prune->add_option("--gates", pr_gates, "JSON file: {conv id: {pre: [...], post: [...]}}")
      ->required();
  cmd_prune->add_option("--out", pr_out, "output prefix")->required();
  cmd_prune->add_option("--dtype", pr_dtype, "f32|f64")->check(CLI::IsMember({"f32", "f64"}));

  auto* cmd_srocc =
      app.add_subcommand("srocc", "Rank-correlate efficiency metrics against runtime");
  std::string sr_fixture, sr_metric = "all", sr_dump;
  cmd_srocc->add_option("--fixture", sr_fixture, "metrics CSV (default: built-in table)");
  cmd_srocc->add_option("--metric", sr_metric, "all|params|flops|activations|memory")
      ->check(CLI::IsMember({"all", "params", "flops", "activations", "memory"}));
  cmd_srocc->add_option("--dump", sr_dump, "write the fixture table as CSV and exit");

  auto* cmd_export = app.add_subcommand("export-weights", "Write a model spec and weight file");
  std::string ex_model, ex_out, ex_dtype = "f32";
  uint32_t ex_seed = 1;
  cmd_export->add_option("model", ex_model, "model name")->required();
  cmd_export->add_option("--out", ex_out, "output prefix")->required();
  cmd_export->add_option("--seed", ex_seed, "weight init seed");
  cmd_export->add_option("--dtype", ex_dtype, "f32|f64")->check(CLI::IsMember({"f32", "f64"}));

  auto* cmd_import = app.add_subcommand("import-weights", "Load and validate a spec + weights");
  std::string im_spec, im_weights;
  cmd_import->add_option("spec", im_spec, "model spec file")->required();
  cmd_import->add_option("weights", im_weights, "weight file")->required();

  app.parse(argc, argv);

  if (cmd_list->parsed()) {
    for (const auto& name : srzoo::model_names()) {
      srzoo::GraphIR g = srzoo::build_model(name);
      const auto r = srzoo::analyze(g, 256, 256);
      std::cout << name << " x" << g.scale << " params " << r.params << " conv_layers "
                << r.conv_layers << "\n";
    }
    return 0;
  }

  if (cmd_analyze->parsed()) {
    const auto [h, w] = parse_size(an_size);
    srzoo::GraphIR g = load_graph_arg(an_model);
    std::cout << emit_analysis(srzoo::analyze(g, h, w), an_format);
    return 0;
  }

  if (cmd_bench->parsed()) {
    srzoo::GraphIR g = load_graph_arg(be_model);
    const auto images = load_dir_images(be_images);
    srzoo::BenchmarkConfig cfg;
    cfg.trials = be_trials;
    cfg.warmup = be_warmup;
    cfg.threads = be_threads;
    const auto res = srzoo::run_benchmark(g, images, cfg);
    std::cout << "images " << images.size() << "\ntrial_s";
    for (double t : res.trial_seconds) std::cout << " " << fixed(t, 6);
    std::cout << "\nbest_s_per_image " << fixed(res.seconds_per_image, 6) << "\n";
    return 0;
  }

  if (cmd_psnr->parsed()) {
    const auto sr_names = srzoo::list_pngs(ps_sr);
    const auto gt_names = srzoo::list_pngs(ps_gt);
    if (sr_names.empty()) throw srzoo::DataError("no .png files in '" + ps_sr + "'");
    if (sr_names != gt_names) throw srzoo::DataError("image sets differ between --sr and --gt");
    double mean = 0.0;
    for (const auto& name : sr_names) {
      const double db = srzoo::psnr(srzoo::read_png(ps_sr + "/" + name),
                                    srzoo::read_png(ps_gt + "/" + name), ps_shave);
      std::cout << "image " << name << " " << db_string(db) << "\n";
      mean += db;
    }
    std::cout << "mean_psnr " << db_string(mean / static_cast<double>(sr_names.size())) << "\n";
    return 0;
  }

  if (cmd_eval->parsed()) {
    srzoo::GraphIR g = load_graph_arg(ev_model);
    srzoo::load_weights(g, ev_weights);
    srzoo::ExecOptions opt;
    opt.threads = ev_threads;
    const auto res = srzoo::evaluate_model(g, ev_lr, ev_gt, ev_shave, opt);
    for (const auto& [name, db] : res.per_image)
      std::cout << "image " << name << " " << db_string(db) << "\n";
    std::cout << "mean_psnr " << db_string(res.mean_psnr) << "\n";
    return 0;
  }

  if (cmd_makelr->parsed()) {
    namespace fs = std::filesystem;
    fs::create_directories(ml_out);
    if (!ml_gt_out.empty()) fs::create_directories(ml_gt_out);
    const auto names = srzoo::list_pngs(ml_hr);
    if (names.empty()) throw srzoo::DataError("no .png files in '" + ml_hr + "'");
    for (const auto& name : names) {
      const auto [gt, lr] = srzoo::make_lr(srzoo::read_png(ml_hr + "/" + name), ml_factor);
      srzoo::write_png(ml_out + "/" + name, lr);
      std::cout << "wrote " << ml_out << "/" << name << "\n";
      if (!ml_gt_out.empty()) {
        srzoo::write_png(ml_gt_out + "/" + name, gt);
        std::cout << "wrote " << ml_gt_out << "/" << name << "\n";
      }
    }
    return 0;
  }

  if (cmd_fuse->parsed()) {
    srzoo::GraphIR g = srzoo::load_model_spec(fu_spec);
    srzoo::load_weights(g, fu_weights);
    std::cout << "fused_sites " << srzoo::fuse_cac_sites(g) << "\n";
    save_bundle(g, fu_out, dtype_flag(fu_dtype));
    return 0;
  }

  if (cmd_prune->parsed()) {
    srzoo::GraphIR g = srzoo::load_model_spec(pr_spec);
    srzoo::load_weights(g, pr_weights);
    std::ifstream gf(pr_gates);
    if (!gf.is_open()) throw srzoo::IoError("cannot open '" + pr_gates + "'");
    std::map<std::string, srzoo::ChannelGates> gates;
    try {
      nlohmann::json j = nlohmann::json::parse(gf);
      for (const auto& [id, spec] : j.items()) {
        srzoo::ChannelGates cg;
        if (spec.contains("pre")) cg.pre = spec["pre"].get<std::vector<double>>();
        if (spec.contains("post")) cg.post = spec["post"].get<std::vector<double>>();
        gates[id] = std::move(cg);
      }
    } catch (const nlohmann::json::exception& e) {
      throw srzoo::DataError(std::string("bad gates file: ") + e.what());
    }
    const auto res = srzoo::prune_zero_gates(g, gates);
    std::cout << "removed_channels " << res.removed_channels << "\n";
    std::cout << "params_before " << res.params_before << "\n";
    std::cout << "params_after " << res.params_after << "\n";
    save_bundle(g, pr_out, dtype_flag(pr_dtype));
    return 0;
  }

  if (cmd_srocc->parsed()) {
    const auto rows =
        sr_fixture.empty() ? srzoo::builtin_fixture() : srzoo::load_fixture_csv(sr_fixture);
    if (!sr_dump.empty()) {
      std::ofstream out(sr_dump, std::ios::binary);
      if (!out.is_open()) throw srzoo::IoError("cannot open '" + sr_dump + "'");
      out << srzoo::emit_report(rows, "csv");
      std::cout << "wrote " << sr_dump << "\n";
      return 0;
    }
    const auto c = srzoo::correlate_with_runtime(rows);
    std::cout << "rows_used " << c.rows_used << " of " << rows.size()
              << " (entries with runtime and all four metrics)\n";
    if (sr_metric == "all" || sr_metric == "params")
      std::cout << "params " << fixed(c.params, 4) << "\n";
    if (sr_metric == "all" || sr_metric == "flops") std::cout << "flops " << fixed(c.flops, 4) << "\n";
    if (sr_metric == "all" || sr_metric == "activations")
      std::cout << "activations " << fixed(c.activations, 4) << "\n";
    if (sr_metric == "all" || sr_metric == "memory")
      std::cout << "memory " << fixed(c.memory, 4) << "\n";
    return 0;
  }

  if (cmd_export->parsed()) {
    srzoo::GraphIR g = srzoo::build_model(ex_model, ex_seed);
    save_bundle(g, ex_out, dtype_flag(ex_dtype));
    return 0;
  }

  if (cmd_import->parsed()) {
    srzoo::GraphIR g = srzoo::load_model_spec(im_spec);
    srzoo::load_weights(g, im_weights);
    g.validate();
    std::cout << "ok model " << g.name << " scale " << g.scale << " blobs "
              << srzoo::detail::weight_entries(g).size() << " params " << srzoo::count_params(g)
              << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srzoo: super-resolution model zoo and efficiency profiler"};
  try {
    return run(app, argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const srzoo::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const srzoo::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const srzoo::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const srzoo::GraphError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
