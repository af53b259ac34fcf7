#include "dusnet/admm.hpp"

#include <cmath>
#include <string>

namespace dus {

void AdmmConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("admm: lambda must be >= 0");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidArgument("admm: mu must be > 0");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("admm: eta must be >= 0");
  if (n_iters == 0) throw InvalidArgument("admm: n_iters must be positive");
  if (!(cg_tol > 0.0)) throw InvalidArgument("admm: cg_tol must be > 0");
  if (cg_max_iters == 0) throw InvalidArgument("admm: cg_max_iters must be positive");
}

DynVolume soft_threshold_complex(const DynVolume& v, double tau) {
  if (!(tau >= 0.0)) throw InvalidArgument("soft threshold: tau must be >= 0");
  DynVolume out(v.shape());
  auto o = out.data();
  auto in = v.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double mag = std::abs(in[i]);
    o[i] = mag > tau ? in[i] * (1.0 - tau / mag) : cplx(0.0, 0.0);
  }
  return out;
}

DynVolume temporal_fft(const DynVolume& v, FftDirection dir) {
  DynVolume out = v;
  fft_temporal_inplace(out.shape(), out.data(), dir);
  return out;
}

DynVolume apply_transform(const DynVolume& v, SparseTransform transform, FftDirection dir) {
  return transform == SparseTransform::temporal_fourier ? temporal_fft(v, dir) : v;
}

DynVolume z_update(const AdmmState& state, const AdmmConfig& cfg) {
  const DynVolume coeffs = apply_transform(add(state.x, state.l), cfg.transform, FftDirection::forward);
  return apply_transform(soft_threshold_complex(coeffs, cfg.lambda / cfg.mu), cfg.transform,
                         FftDirection::inverse);
}

namespace {

void require_problem_shapes(const DynVolume& z, const DynVolume& l, const KSpace& b, const EncodingOp& op) {
  if (!(z.shape() == op.shape()) || !(l.shape() == op.shape()) || !(b.shape() == op.shape())) {
    throw InvalidArgument("x-update: operand shapes do not match the encoding " + op.shape().str());
  }
}

// (A^H A + mu) v
DynVolume normal_operator(const DynVolume& v, const EncodingOp& op, double mu) {
  DynVolume out = op.adjoint(op.forward(v));
  axpy(cplx(mu, 0.0), v, out);
  return out;
}

}  // namespace

DynVolume x_update_closed_form(const DynVolume& z, const DynVolume& l, const KSpace& b, const EncodingOp& op,
                               double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidArgument("x-update: mu must be > 0");
  require_problem_shapes(z, l, b, op);
  const Shape3T& shape = op.shape();
  DynVolume y = sub(z, l);
  auto yk = y.data();
  fft2_frames_inplace(shape, yk, FftDirection::forward);
  const auto bk = b.data();
  const SamplingMask& mask = op.mask();
  for (std::size_t i = 0; i < yk.size(); ++i) {
    if (mask[i]) yk[i] = (bk[i] + mu * yk[i]) / (1.0 + mu);
  }
  fft2_frames_inplace(shape, yk, FftDirection::inverse);
  return y;
}

CgResult x_update_cg(const DynVolume& z, const DynVolume& l, const KSpace& b, const EncodingOp& op, double mu,
                     double tol, std::size_t max_iters) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidArgument("x-update: mu must be > 0");
  if (!(tol > 0.0)) throw InvalidArgument("x-update: cg tolerance must be > 0");
  require_problem_shapes(z, l, b, op);

  const DynVolume y = sub(z, l);
  DynVolume rhs = op.adjoint(b);
  axpy(cplx(mu, 0.0), y, rhs);
  const double rhs_norm = frobenius_norm(rhs);

  CgResult result{y, 0, 0.0};
  if (rhs_norm == 0.0) {
    result.x = DynVolume(op.shape());
    return result;
  }

  DynVolume r = sub(rhs, normal_operator(result.x, op, mu));
  DynVolume p = r;
  double rr = squared_norm(r);
  result.relative_residual = std::sqrt(rr) / rhs_norm;

  while (result.relative_residual > tol && result.iterations < max_iters) {
    const DynVolume q = normal_operator(p, op, mu);
    const double pq = inner_product(p, q).real();
    if (!(pq > 0.0) || !std::isfinite(pq)) {
      throw NumericalFailure("cg: curvature p^H A p = " + std::to_string(pq) + " is not positive and finite");
    }
    const double alpha = rr / pq;
    axpy(cplx(alpha, 0.0), p, result.x);
    axpy(cplx(-alpha, 0.0), q, r);
    const double rr_new = squared_norm(r);
    if (!std::isfinite(rr_new)) throw NumericalFailure("cg: residual became non-finite");
    const double beta = rr_new / rr;
    rr = rr_new;
    DynVolume next = r;
    axpy(cplx(beta, 0.0), p, next);
    p = std::move(next);
    ++result.iterations;
    result.relative_residual = std::sqrt(rr) / rhs_norm;
  }
  if (!result.x.all_finite()) throw NumericalFailure("cg: solution contains non-finite values");
  return result;
}

DynVolume l_update(const AdmmState& state, double eta) {
  DynVolume out = state.l;
  axpy(cplx(-eta, 0.0), sub(state.z, state.x), out);
  return out;
}

IterationRecord evaluate_objective(const DynVolume& x, const KSpace& b, const EncodingOp& op,
                                   const AdmmConfig& cfg) {
  IterationRecord rec;
  const KSpace residual = sub(op.forward(x), b);
  const double r = frobenius_norm(residual);
  rec.fidelity = 0.5 * r * r;
  const DynVolume coeffs = apply_transform(x, cfg.transform, FftDirection::forward);
  for (const cplx& c : coeffs.data()) rec.l1 += std::abs(c);
  rec.objective = rec.fidelity + cfg.lambda * rec.l1;
  return rec;
}

AdmmResult reconstruct(const KSpace& b, const EncodingOp& op, const AdmmConfig& cfg) {
  cfg.validate();
  if (!(b.shape() == op.shape())) {
    throw InvalidArgument("reconstruct: k-space shape " + b.shape().str() + " does not match mask " +
                          op.shape().str());
  }
  AdmmResult result;
  AdmmState& s = result.state;
  s.x = op.adjoint(b);
  s.z = s.x;
  s.l = DynVolume(op.shape());
  result.history.reserve(cfg.n_iters);

  for (std::size_t n = 1; n <= cfg.n_iters; ++n) {
    s.z = z_update(s, cfg);
    std::size_t cg_iters = 0;
    if (cfg.x_update == XUpdate::closed_form) {
      s.x = x_update_closed_form(s.z, s.l, b, op, cfg.mu);
    } else {
      CgResult cg = x_update_cg(s.z, s.l, b, op, cfg.mu, cfg.cg_tol, cfg.cg_max_iters);
      s.x = std::move(cg.x);
      cg_iters = cg.iterations;
    }
    s.l = l_update(s, cfg.eta);

    IterationRecord rec = evaluate_objective(s.x, b, op, cfg);
    rec.iteration = n;
    rec.constraint = frobenius_norm(sub(s.z, s.x));
    rec.cg_iterations = cg_iters;
    if (!std::isfinite(rec.objective)) {
      throw NumericalFailure("admm: objective became non-finite at iteration " + std::to_string(n));
    }
    result.history.push_back(rec);
  }
  result.x = s.x;
  return result;
}

}  // namespace dus
