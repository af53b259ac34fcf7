#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>

#include "CLI11.hpp"
#include "dusnet/admm.hpp"
#include "dusnet/encoding.hpp"
#include "dusnet/errors.hpp"
#include "dusnet/fft.hpp"
#include "dusnet/gradcheck.hpp"
#include "dusnet/io.hpp"
#include "dusnet/metrics.hpp"
#include "dusnet/network.hpp"
#include "dusnet/phantom.hpp"
#include "dusnet/trainer.hpp"
#include "train_config.hpp"

namespace dus::cli {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Shape3T shape_flag(const std::string& flag, const std::string& value) {
  try {
    return parse_shape(value);
  } catch (const InvalidArgument& e) {
    throw UsageError(flag + ": " + e.what());
  }
}

SamplingMask make_mask(const std::string& pattern, const Shape3T& shape, std::size_t spokes, double accel,
                       std::size_t center_lines, std::uint64_t seed) {
  if (pattern == "radial") return make_pseudo_radial_mask(shape, spokes, seed);
  return make_vds_mask(shape, accel, center_lines, seed);
}

void check_same_shape(const Shape3T& a, const Shape3T& b, const char* what) {
  if (a != b) throw InvalidArgument(std::string(what) + ": shape " + a.str() + " does not match " + b.str());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  return os;
}

struct Options {
  // phantom
  std::string shape = "64x64x8";
  std::size_t ellipses = 6;
  double motion = 0.05;
  std::uint64_t seed = 0;
  std::string out;
  // mask
  std::string pattern;
  std::size_t spokes = 16;
  double accel = 4.0;
  std::size_t center_lines = kDefaultCenterLines;
  // simulate
  std::string volume;
  std::string mask;
  double noise_sigma = 0.0;
  // recon-admm
  std::string data;
  double lambda = 0.01;
  double mu = 0.1;
  double eta = 1.0;
  std::size_t iters = 50;
  std::string x_update = "closed";
  std::string transform = "fourier";
  std::string diag;
  // train
  std::string config;
  std::string out_ckpt;
  std::string history;
  // recon-net
  std::string ckpt;
  // eval
  std::string recon;
  std::string gt;
};

void cmd_phantom(const Options& o, std::ostream& out) {
  PhantomSpec spec;
  spec.shape = shape_flag("--shape", o.shape);
  spec.n_ellipses = o.ellipses;
  spec.motion = o.motion;
  spec.seed = o.seed;
  const DynVolume v = generate_phantom(spec);
  save_dmrt(o.out, v);
  out << "wrote " << o.out << " " << spec.shape.str() << "\n";
}

void cmd_mask(const Options& o, std::ostream& out) {
  const Shape3T shape = shape_flag("--shape", o.shape);
  const SamplingMask m = make_mask(o.pattern, shape, o.spokes, o.accel, o.center_lines, o.seed);
  save_dmrt(o.out, m);
  out << "wrote " << o.out << " " << shape.str() << " fraction " << std::setprecision(6) << m.fraction() << "\n";
}

void cmd_simulate(const Options& o, std::ostream& out) {
  const DynVolume x = load_volume(o.volume);
  const SamplingMask m = load_mask(o.mask);
  check_same_shape(x.shape(), m.shape(), "simulate");
  const EncodingOp op(m);
  KSpace b = op.forward(x);
  if (o.noise_sigma > 0.0) b = add_noise(b, m, o.noise_sigma, o.seed);
  save_dmrt(o.out, b);
  out << "wrote " << o.out << " " << x.shape().str() << "\n";
}

void cmd_zerofill(const Options& o, std::ostream& out) {
  const KSpace b = load_kspace(o.data);
  const SamplingMask m = load_mask(o.mask);
  check_same_shape(b.shape(), m.shape(), "zerofill");
  const EncodingOp op(m);
  save_dmrt(o.out, op.adjoint(b));
  out << "wrote " << o.out << " " << b.shape().str() << "\n";
}

void cmd_recon_admm(const Options& o, std::ostream& out) {
  const KSpace b = load_kspace(o.data);
  const SamplingMask m = load_mask(o.mask);
  check_same_shape(b.shape(), m.shape(), "recon-admm");
  AdmmConfig cfg;
  cfg.lambda = o.lambda;
  cfg.mu = o.mu;
  cfg.eta = o.eta;
  cfg.n_iters = o.iters;
  cfg.x_update = o.x_update == "cg" ? XUpdate::cg : XUpdate::closed_form;
  cfg.transform = o.transform == "identity" ? SparseTransform::identity : SparseTransform::temporal_fourier;
  const AdmmResult r = reconstruct(b, EncodingOp(m), cfg);
  save_dmrt(o.out, r.x);
  if (!o.diag.empty()) {
    std::ofstream d = open_out(o.diag);
    d << "iteration objective fidelity l1 constraint cg_iterations\n" << std::setprecision(17);
    for (const IterationRecord& rec : r.history) {
      d << rec.iteration << ' ' << rec.objective << ' ' << rec.fidelity << ' ' << rec.l1 << ' ' << rec.constraint
        << ' ' << rec.cg_iterations << '\n';
    }
  }
  const IterationRecord& last = r.history.back();
  out << "wrote " << o.out << " iterations " << r.history.size() << " objective " << std::setprecision(8)
      << last.objective << " constraint " << last.constraint << "\n";
}

std::vector<DynVolume> build_dataset(const TrainSetup& s) {
  std::vector<DynVolume> base;
  if (!s.data_files.empty()) {
    for (const std::string& f : s.data_files) base.push_back(load_volume(f));
  } else {
    for (std::size_t i = 0; i < s.n_train; ++i) {
      PhantomSpec spec;
      spec.shape = s.shape;
      spec.n_ellipses = s.ellipses;
      spec.motion = s.motion;
      spec.seed = s.data_seed + i;
      base.push_back(generate_phantom(spec));
    }
  }
  if (s.patch.size() == 0) return base;
  std::vector<DynVolume> patches;
  for (const DynVolume& v : base) {
    auto p = extract_patches(v, PatchSpec{s.patch, s.patch_stride});
    std::move(p.begin(), p.end(), std::back_inserter(patches));
  }
  if (patches.empty()) throw InvalidArgument("train: patch " + s.patch.str() + " does not fit the data");
  return patches;
}

void cmd_train(const Options& o, std::ostream& out) {
  TrainSetup s = load_train_config(o.config);
  s.train.checkpoint_path = o.out_ckpt;
  const std::vector<DynVolume> dataset = build_dataset(s);
  MaskGenerator masks = [s](const Shape3T& shape, std::uint64_t seed) {
    return make_mask(s.pattern, shape, s.spokes, s.accel, s.center_lines, seed);
  };

  std::unique_ptr<std::ofstream> hist;
  if (!o.history.empty()) {
    hist = std::make_unique<std::ofstream>(open_out(o.history));
    *hist << "step lr mse penalty total\n" << std::setprecision(17);
  }
  const TrainResult r = train_loop(dataset, masks, s.net, s.train, [&](const LossRecord& rec) {
    if (hist) *hist << rec.step << ' ' << rec.lr << ' ' << rec.mse << ' ' << rec.penalty << ' ' << rec.total << '\n';
  });
  save_checkpoint(o.out_ckpt, Checkpoint{s.net, r.params, TrainingMetadata{r.steps, s.train.seed}});
  out << "wrote " << o.out_ckpt << " steps " << r.steps << " samples " << dataset.size();
  if (!r.history.empty()) {
    out << " first_loss " << std::setprecision(8) << r.history.front().total << " last_loss "
        << r.history.back().total;
  }
  out << "\n";
}

void cmd_recon_net(const Options& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.ckpt);
  const KSpace b = load_kspace(o.data);
  const SamplingMask m = load_mask(o.mask);
  check_same_shape(b.shape(), m.shape(), "recon-net");
  const ForwardResult fwd = network_forward(b, EncodingOp(m), ck.params, ck.config);
  save_dmrt(o.out, fwd.x_hat);
  out << "wrote " << o.out << " " << b.shape().str() << "\n";
}

// Identical inputs give an infinite PSNR; the printed value is capped.
constexpr double kPsnrDisplayCap = 999.99;

void cmd_eval(const Options& o, std::ostream& out) {
  const DynVolume x = load_volume(o.recon);
  const DynVolume gt = load_volume(o.gt);
  check_same_shape(x.shape(), gt.shape(), "eval");
  const double p = psnr(x, gt);
  const double s = ssim(x, gt);
  out << std::fixed << std::setprecision(6);
  out << "psnr " << std::min(p, kPsnrDisplayCap) << "\n";
  out << "ssim " << s << "\n";
}

bool cmd_gradcheck(const Options& o, std::ostream& out) {
  std::vector<GradCheckResult> results;
  results.push_back(gradcheck_ast(o.seed));
  results.push_back(gradcheck_conv(o.seed, false));
  results.push_back(gradcheck_conv(o.seed, true));
  results.push_back(gradcheck_stack(o.seed));
  results.push_back(gradcheck_zblock(o.seed));
  results.push_back(gradcheck_penalty(o.seed));
  results.push_back(gradcheck_mse(o.seed));
  results.push_back(gradcheck_network(o.seed));
  bool ok = true;
  for (const GradCheckResult& r : results) {
    ok = ok && r.passed();
    out << (r.passed() ? "PASS " : "FAIL ") << r.name << " checked " << r.checked << " skipped " << r.skipped
        << " max_rel_error " << std::scientific << std::setprecision(3) << r.max_rel_error << " tol "
        << r.tolerance << std::defaultfloat;
    if (!r.passed()) out << " worst " << r.worst;
    out << "\n";
  }
  return ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dynamic MR reconstruction with deep unrolled networks", "dusnet"};
  app.require_subcommand(1);
  Options o;

  auto* phantom = app.add_subcommand("phantom", "write a synthetic dynamic phantom");
  phantom->add_option("--shape", o.shape, "HxWxT")->capture_default_str();
  phantom->add_option("--ellipses", o.ellipses)->capture_default_str()->check(CLI::PositiveNumber);
  phantom->add_option("--motion", o.motion)->capture_default_str();
  phantom->add_option("--seed", o.seed)->capture_default_str();
  phantom->add_option("--out", o.out)->required();

  auto* mask = app.add_subcommand("mask", "write a k-t sampling mask");
  mask->add_option("--pattern", o.pattern)->required()->check(CLI::IsMember({"radial", "vds"}));
  mask->add_option("--spokes", o.spokes, "radial spokes per frame")->capture_default_str();
  mask->add_option("--accel", o.accel, "vds acceleration")->capture_default_str();
  mask->add_option("--center-lines", o.center_lines)->capture_default_str();
  mask->add_option("--shape", o.shape, "HxWxT")->capture_default_str();
  mask->add_option("--seed", o.seed)->capture_default_str();
  mask->add_option("--out", o.out)->required();

  auto* simulate = app.add_subcommand("simulate", "undersample a volume: b = M F x (+ noise)");
  simulate->add_option("--volume", o.volume)->required();
  simulate->add_option("--mask", o.mask)->required();
  simulate->add_option("--noise-sigma", o.noise_sigma)->capture_default_str();
  simulate->add_option("--seed", o.seed)->capture_default_str();
  simulate->add_option("--out", o.out)->required();

  auto* zerofill = app.add_subcommand("zerofill", "zero-filled reconstruction A^H b");
  zerofill->add_option("--data", o.data)->required();
  zerofill->add_option("--mask", o.mask)->required();
  zerofill->add_option("--out", o.out)->required();

  auto* admm = app.add_subcommand("recon-admm", "model-based ADMM reconstruction");
  admm->add_option("--data", o.data)->required();
  admm->add_option("--mask", o.mask)->required();
  admm->add_option("--lambda", o.lambda)->capture_default_str();
  admm->add_option("--mu", o.mu)->capture_default_str();
  admm->add_option("--eta", o.eta)->capture_default_str();
  admm->add_option("--iters", o.iters)->capture_default_str();
  admm->add_option("--x-update", o.x_update)->capture_default_str()->check(CLI::IsMember({"closed", "cg"}));
  admm->add_option("--transform", o.transform)->capture_default_str()->check(CLI::IsMember({"fourier", "identity"}));
  admm->add_option("--out", o.out)->required();
  admm->add_option("--diag", o.diag, "per-iteration diagnostics file");

  auto* train = app.add_subcommand("train", "train the unrolled network");
  train->add_option("--config", o.config, "key=value file")->required();
  train->add_option("--out-ckpt", o.out_ckpt)->required();
  train->add_option("--history", o.history, "per-step loss file");

  auto* recon_net = app.add_subcommand("recon-net", "reconstruct with a trained checkpoint");
  recon_net->add_option("--ckpt", o.ckpt)->required();
  recon_net->add_option("--data", o.data)->required();
  recon_net->add_option("--mask", o.mask)->required();
  recon_net->add_option("--out", o.out)->required();

  auto* eval = app.add_subcommand("eval", "print PSNR and SSIM of a reconstruction");
  eval->add_option("--recon", o.recon)->required();
  eval->add_option("--gt", o.gt)->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suites");
  gradcheck->add_option("--seed", o.seed)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (phantom->parsed()) cmd_phantom(o, out);
    if (mask->parsed()) cmd_mask(o, out);
    if (simulate->parsed()) cmd_simulate(o, out);
    if (zerofill->parsed()) cmd_zerofill(o, out);
    if (admm->parsed()) cmd_recon_admm(o, out);
    if (train->parsed()) cmd_train(o, out);
    if (recon_net->parsed()) cmd_recon_net(o, out);
    if (eval->parsed()) cmd_eval(o, out);
    if (gradcheck->parsed() && !cmd_gradcheck(o, out)) {
      err << "gradcheck: one or more suites failed\n";
      return kExitNumerical;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsupportedMode& e) {
    err << "unsupported: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidArgument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace dus::cli
