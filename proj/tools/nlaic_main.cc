#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "nlaic/bdrate.h"
#include "nlaic/codec.h"
#include "nlaic/data.h"
#include "nlaic/image_io.h"
#include "nlaic/metrics.h"
#include "nlaic/plots.h"
#include "nlaic/training.h"

namespace {

using nlaic::Tensor;
using json = nlohmann::json;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed for " + path);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t next = s.find(',', pos);
    if (next == std::string::npos) next = s.size();
    out.push_back(std::stoi(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t next = s.find(',', pos);
    if (next == std::string::npos) next = s.size();
    out.push_back(std::stod(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

json curve_to_json(const nlaic::RDCurve& c) {
  json points = json::array();
  for (const auto& p : c.points)
    points.push_back({{"bpp", p.bpp}, {"psnr", p.psnr}, {"msssim", p.msssim}, {"msssim_db", p.msssim_db}});
  return json{{"label", c.label}, {"points", points}};
}

nlaic::RDCurve curve_from_json(const json& j) {
  nlaic::RDCurve c;
  c.label = j.value("label", "curve");
  for (const auto& p : j.at("points"))
    c.points.push_back({p.at("bpp").get<double>(), p.value("psnr", 0.0), p.value("msssim", 0.0),
                        p.value("msssim_db", 0.0)});
  return c;
}

int cmd_train(const std::string& data_dir, const std::string& out_path, const std::string& init_path,
              const std::string& mode, const std::string& variant_str, double lambda, const std::string& metric,
              int epochs, int steps, int batch, int patch, int patches, std::uint64_t seed, double lr, int channels,
              int latent_channels, int context_kernel, int sparse_s, const std::string& stats_path,
              const std::string& targets_str, int fit_steps) {
  nlaic::TrainingConfig cfg;
  cfg.lambda = lambda;
  cfg.metric = metric == "msssim" ? nlaic::TrainingConfig::Metric::kMsssim : nlaic::TrainingConfig::Metric::kMse;
  cfg.epochs = epochs;
  cfg.batch = batch;
  cfg.patch = patch;
  cfg.seed = seed;
  cfg.lr = lr;
  cfg.validate();

  nlaic::CodecModel model = [&] {
    if (!init_path.empty()) return nlaic::CodecModel::load(init_path);
    nlaic::ArchConfig arch;
    arch.n_channels = channels;
    arch.latent_channels = latent_channels;
    arch.context_kernel = context_kernel;
    arch.nln_sparse_s = sparse_s;
    arch.variant = nlaic::context_variant_from_string(variant_str);
    return nlaic::CodecModel::create(arch, seed);
  }();

  if (mode == "scaling") {
    if (targets_str.empty()) throw std::runtime_error("train --mode scaling requires --targets l1,l2,...");
    Tensor calib = nlaic::crop_patches(data_dir, patch, patches, seed);
    auto results = nlaic::fit_scaling_factors(model, calib, parse_double_list(targets_str), cfg, fit_steps);
    for (const auto& r : results) {
      std::cout << "fitted q=" << r.quality << " lambda=" << r.target_lambda << " mean_a=" << r.mean_a
                << " mean_b=" << r.mean_b << " loss " << r.first_loss << " -> " << r.final_loss
                << (r.converged ? "" : "  (NOT CONVERGED)") << "\n";
      if (!r.converged) std::cerr << "warning: scaling fit for lambda=" << r.target_lambda << " did not converge\n";
    }
    model.save(out_path);
    std::cout << "saved " << out_path << " with " << model.num_quality() << " quality tables\n";
    return 0;
  }

  nlaic::TrainScope scope = nlaic::TrainScope::kAll;
  if (mode == "context") {
    if (init_path.empty()) throw std::runtime_error("train --mode context requires --init");
    scope = nlaic::TrainScope::kContextOnly;
    if (!variant_str.empty()) model.arch.variant = nlaic::context_variant_from_string(variant_str);
  } else if (mode != "full") {
    throw std::runtime_error("unknown --mode " + mode + " (full|context|scaling)");
  }

  Tensor data = nlaic::crop_patches(data_dir, patch, patches, seed);
  const int per_epoch = std::max(1, (patches + batch - 1) / batch);
  const int total = steps > 0 ? steps : epochs * per_epoch;
  auto stats = nlaic::run_training(model, data, cfg, scope, 0, total, stats_path);
  model.save(out_path);
  const auto& last = stats.back();
  std::cout << "trained " << total << " steps; final loss " << last.loss << " bpp_x " << last.bpp_x << " bpp_z "
            << last.bpp_z << " d " << last.d << "\nsaved " << out_path << "\n";
  return 0;
}

int cmd_encode(const std::string& model_path, const std::string& input, const std::string& output, int quality,
               const std::string& variant_str) {
  nlaic::CodecModel model = nlaic::CodecModel::load(model_path);
  if (!variant_str.empty() && nlaic::context_variant_from_string(variant_str) != model.arch.variant)
    throw std::runtime_error("requested variant " + variant_str + " does not match the model's (" +
                             to_string(model.arch.variant) + ")");
  Tensor img = nlaic::read_image(input);
  nlaic::EncodeResult r = nlaic::encode_image(img, model, quality);
  write_file(output, r.bytes);
  const double total = static_cast<double>(r.bytes.size());
  std::cout << "encoded " << input << " -> " << output << "\n"
            << "  " << img.dim(2) << "x" << img.dim(1) << ", quality " << quality << ", variant "
            << to_string(model.arch.variant) << "\n"
            << "  bpp " << r.actual_bpp << " (estimated " << r.estimated_bpp << ")\n"
            << "  segments: header " << nlaic::kHeaderSize << " B, hyper " << r.hyper_bytes << " B ("
            << 100.0 * r.hyper_bytes / total << "%), main " << r.main_bytes << " B\n";
  return 0;
}

int cmd_decode(const std::string& model_path, const std::string& input, const std::string& output, bool sequential) {
  nlaic::CodecModel model = nlaic::CodecModel::load(model_path);
  auto bytes = read_file(input);
  nlaic::DecodeResult r = nlaic::decode_bitstream(
      bytes, model, sequential ? nlaic::DecodeSchedule::kSequential : nlaic::DecodeSchedule::kAuto);
  nlaic::write_image(output, r.image);
  std::cout << "decoded " << input << " -> " << output << " (" << r.image.dim(2) << "x" << r.image.dim(1) << ")\n";
  return 0;
}

int cmd_eval(const std::vector<std::string>& model_paths, const std::string& data_dir, const std::string& qualities,
             const std::string& out_json, const std::string& plot_prefix, const std::string& label) {
  auto images = nlaic::list_images(data_dir);
  if (images.empty()) throw std::runtime_error("no images in " + data_dir);
  nlaic::RDCurve curve;
  curve.label = label;
  json per_image = json::array();
  for (const std::string& mp : model_paths) {
    nlaic::CodecModel model = nlaic::CodecModel::load(mp);
    std::vector<int> qs = qualities.empty() ? std::vector<int>{0} : parse_int_list(qualities);
    for (int q : qs) {
      double bpp = 0, ps = 0, ms = 0;
      for (const std::string& path : images) {
        Tensor img = nlaic::read_image(path);
        nlaic::EncodeResult enc = nlaic::encode_image(img, model, q);
        nlaic::DecodeResult dec = nlaic::decode_bitstream(enc.bytes, model);
        const double i_bpp = enc.actual_bpp;
        const double i_psnr = nlaic::psnr(img, dec.image);
        const double i_ms = nlaic::ms_ssim(img, dec.image);
        per_image.push_back({{"model", mp},
                             {"image", path},
                             {"quality", q},
                             {"bpp", i_bpp},
                             {"psnr", i_psnr},
                             {"msssim", i_ms},
                             {"msssim_db", nlaic::msssim_db(i_ms)}});
        bpp += i_bpp;
        ps += i_psnr;
        ms += i_ms;
      }
      const double n = static_cast<double>(images.size());
      curve.points.push_back({bpp / n, ps / n, ms / n, nlaic::msssim_db(ms / n)});
    }
  }
  std::sort(curve.points.begin(), curve.points.end(),
            [](const nlaic::RDPoint& a, const nlaic::RDPoint& b) { return a.bpp < b.bpp; });
  json out = curve_to_json(curve);
  out["per_image"] = per_image;
  std::ofstream os(out_json);
  if (!os) throw std::runtime_error("cannot open " + out_json);
  os << out.dump(2) << "\n";
  if (!plot_prefix.empty()) {
    nlaic::PlotSeries sp{curve.label, {}}, sm{curve.label, {}};
    for (const auto& p : curve.points) {
      sp.points.push_back({p.bpp, p.psnr});
      sm.points.push_back({p.bpp, p.msssim_db});
    }
    nlaic::write_svg_plot(plot_prefix + "_psnr.svg", "Rate-distortion (PSNR)", "bpp", "PSNR (dB)", {sp});
    nlaic::write_svg_plot(plot_prefix + "_msssim.svg", "Rate-distortion (MS-SSIM)", "bpp", "MS-SSIM (dB)", {sm});
  }
  for (const auto& p : curve.points)
    std::cout << "bpp " << p.bpp << "  psnr " << p.psnr << "  msssim " << p.msssim << " (" << p.msssim_db << " dB)\n";
  std::cout << "wrote " << out_json << "\n";
  return 0;
}

int cmd_bdrate(const std::string& anchor_path, const std::string& test_path, const std::string& metric) {
  json ja, jt;
  std::ifstream(anchor_path) >> ja;
  std::ifstream(test_path) >> jt;
  const nlaic::BdMetric m = metric == "msssim_db" ? nlaic::BdMetric::kMsssimDb : nlaic::BdMetric::kPsnr;
  const double r = nlaic::bd_rate(curve_from_json(ja), curve_from_json(jt), m);
  std::cout.setf(std::ios::fixed);
  std::cout.precision(2);
  std::cout << "BD-rate (" << metric << "): " << r << "%\n";
  return 0;
}

int cmd_inspect(const std::string& input) {
  auto bytes = read_file(input);
  nlaic::RateBreakdown b = nlaic::rate_breakdown(bytes);
  nlaic::ParsedBitstream p = nlaic::parse_bitstream(bytes);
  std::cout << input << ": " << bytes.size() << " bytes\n"
            << "  " << p.header.width << "x" << p.header.height << " +pad(" << int(p.header.pad_right) << ","
            << int(p.header.pad_bottom) << "), C=" << p.header.latent_channels << ", quality "
            << int(p.header.quality) << ", variant " << to_string(p.header.variant) << ", L=" << int(p.header.latent_bound)
            << ", Lz=" << int(p.header.hyper_bound) << "\n"
            << "  header " << b.header_bytes << " B (" << b.header_share << "%)\n"
            << "  hyper  " << b.hyper_bytes << " B (" << b.hyper_share << "%)\n"
            << "  main   " << b.main_bytes << " B (" << b.main_share << "%)\n";
  return 0;
}

int cmd_masks(const std::string& model_path, const std::string& input, const std::string& out_dir,
              const std::string& channels_str) {
  nlaic::CodecModel model = nlaic::CodecModel::load(model_path);
  Tensor img = nlaic::read_image(input);
  int pr = 0, pb = 0;
  Tensor padded = nlaic::pad_reflect(img, nlaic::ArchConfig::kDownsampleFactor, &pr, &pb);
  Tensor masks = model.encoder_masks(padded);
  std::filesystem::create_directories(out_dir);

  std::vector<int> channels;
  if (channels_str.empty()) {
    channels = masks.dim(0) > 19 ? std::vector<int>{4, 19} : std::vector<int>{0, masks.dim(0) - 1};
  } else {
    channels = parse_int_list(channels_str);
  }
  const int h = masks.dim(1), w = masks.dim(2);
  for (int c : channels) {
    if (c < 0 || c >= masks.dim(0)) throw std::runtime_error("mask channel " + std::to_string(c) + " out of range");
    Tensor gray({1, h, w});
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) gray.at3(0, i, j) = masks.at3(c, i, j);
    char name[64];
    std::snprintf(name, sizeof(name), "mask_ch%03d.png", c);
    nlaic::write_image(out_dir + "/" + name, gray);
  }
  // Channel-summed attention, min-max normalized for display.
  Tensor sum({1, h, w});
  for (int c = 0; c < masks.dim(0); ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) sum.at3(0, i, j) += masks.at3(c, i, j);
  double lo = sum[0], hi = sum[0];
  for (std::int64_t i = 0; i < sum.size(); ++i) {
    lo = std::min(lo, sum[i]);
    hi = std::max(hi, sum[i]);
  }
  const double scale = hi > lo ? 1.0 / (hi - lo) : 1.0;
  for (std::int64_t i = 0; i < sum.size(); ++i) sum[i] = (sum[i] - lo) * scale;
  nlaic::write_image(out_dir + "/mask_sum.png", sum);
  std::cout << "wrote " << channels.size() << " channel masks + summed map to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nlaic - learned image codec with non-local attention and 3D-context entropy modeling"};
  app.require_subcommand(1);

  // train
  std::string data_dir, out_path, init_path, mode = "full", variant = "full_causal", metric = "mse";
  std::string stats_path, targets;
  double lambda = 2e5, lr = 1e-4;
  int epochs = 1, steps = 0, batch = 8, patch = 64, patches = 500, channels = 32, latent_channels = 32;
  int context_kernel = 5, sparse_s = 1, fit_steps = 60;
  std::uint64_t seed = 1;
  auto* t = app.add_subcommand("train", "train a model (full, context-only refinement, or scaling-factor fitting)");
  t->add_option("--data", data_dir, "directory of PNG/PPM training images")->required();
  t->add_option("--out", out_path, "output checkpoint path")->required();
  t->add_option("--init", init_path, "initial checkpoint to start from");
  t->add_option("--mode", mode, "full | context | scaling");
  t->add_option("--variant", variant, "context variant (hyper_only|channel_only|no_left|full_causal)");
  t->add_option("--lambda", lambda, "RD weight: loss = lambda*d + bits");
  t->add_option("--metric", metric, "mse | msssim");
  t->add_option("--epochs", epochs, "training epochs");
  t->add_option("--steps", steps, "exact step count (overrides --epochs)");
  t->add_option("--batch", batch, "batch size");
  t->add_option("--patch", patch, "patch size");
  t->add_option("--patches", patches, "number of patches to crop");
  t->add_option("--seed", seed, "rng seed");
  t->add_option("--lr", lr, "learning rate");
  t->add_option("--channels", channels, "feature channels");
  t->add_option("--latent-channels", latent_channels, "latent channels");
  t->add_option("--context-kernel", context_kernel, "masked 3D kernel size (3 or 5)");
  t->add_option("--sparse-s", sparse_s, "NLN key/value downsampling factor");
  t->add_option("--stats", stats_path, "per-step JSONL stats log");
  t->add_option("--targets", targets, "scaling mode: comma-separated target lambdas");
  t->add_option("--fit-steps", fit_steps, "scaling mode: optimizer steps per target");

  // encode
  std::string model_path, input, output, enc_variant;
  int quality = 0;
  auto* e = app.add_subcommand("encode", "encode an image to a .nlc bitstream");
  e->add_option("--model", model_path, "model checkpoint")->required();
  e->add_option("--input", input, "input image (PNG/PPM)")->required();
  e->add_option("--output", output, "output .nlc path")->required();
  e->add_option("-q,--quality", quality, "quality index (scaling table)");
  e->add_option("--variant", enc_variant, "context variant (must match the model)");

  // decode
  std::string d_model, d_input, d_output;
  bool d_sequential = false;
  auto* d = app.add_subcommand("decode", "decode a .nlc bitstream to an image");
  d->add_option("--model", d_model, "model checkpoint")->required();
  d->add_option("--input", d_input, "input .nlc")->required();
  d->add_option("--output", d_output, "output image (.png/.ppm)")->required();
  d->add_flag("--sequential", d_sequential, "force fully sequential context evaluation");

  // eval
  std::vector<std::string> ev_models;
  std::string ev_data, ev_qualities, ev_out = "rd.json", ev_plot, ev_label = "nlaic";
  auto* ev = app.add_subcommand("eval", "encode+decode a directory and emit an RD curve (JSON + SVG plots)");
  ev->add_option("--model", ev_models, "model checkpoint(s)")->required();
  ev->add_option("--data", ev_data, "directory of images")->required();
  ev->add_option("--qualities", ev_qualities, "comma-separated quality indices (default 0)");
  ev->add_option("--out", ev_out, "output JSON path");
  ev->add_option("--plot", ev_plot, "plot file prefix (writes <prefix>_psnr.svg and <prefix>_msssim.svg)");
  ev->add_option("--label", ev_label, "curve label");

  // bdrate
  std::string bd_anchor, bd_test, bd_metric = "psnr";
  auto* bd = app.add_subcommand("bdrate", "Bjontegaard delta rate between two RD curve JSON files");
  bd->add_option("--anchor", bd_anchor, "anchor curve JSON")->required();
  bd->add_option("--test", bd_test, "test curve JSON")->required();
  bd->add_option("--metric", bd_metric, "psnr | msssim_db");

  // inspect
  std::string in_input;
  auto* in = app.add_subcommand("inspect", "per-segment rate breakdown of a .nlc file");
  in->add_option("--input", in_input, "input .nlc")->required();

  // masks
  std::string m_model, m_input, m_outdir = "masks", m_channels;
  auto* mk = app.add_subcommand("masks", "dump attention masks of the bottleneck NLAM");
  mk->add_option("--model", m_model, "model checkpoint")->required();
  mk->add_option("--input", m_input, "input image")->required();
  mk->add_option("--out-dir", m_outdir, "output directory");
  mk->add_option("--channels", m_channels, "comma-separated mask channels (default 4,19)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (t->parsed())
      return cmd_train(data_dir, out_path, init_path, mode, variant, lambda, metric, epochs, steps, batch, patch,
                       patches, seed, lr, channels, latent_channels, context_kernel, sparse_s, stats_path, targets,
                       fit_steps);
    if (e->parsed()) return cmd_encode(model_path, input, output, quality, enc_variant);
    if (d->parsed()) return cmd_decode(d_model, d_input, d_output, d_sequential);
    if (ev->parsed()) return cmd_eval(ev_models, ev_data, ev_qualities, ev_out, ev_plot, ev_label);
    if (bd->parsed()) return cmd_bdrate(bd_anchor, bd_test, bd_metric);
    if (in->parsed()) return cmd_inspect(in_input);
    if (mk->parsed()) return cmd_masks(m_model, m_input, m_outdir, m_channels);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
