#include "dusnet/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace dus {
namespace {

enum class Axes { spatial, temporal };

// Plans are created once per (axes, shape, sign) on scratch memory with
// FFTW_UNALIGNED, then executed on caller buffers through the new-array
// interface. The planner is not thread-safe, hence the mutex.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(Axes axes, const Shape3T& s, int sign) {
    const Key key{static_cast<int>(axes), s.h, s.w, s.t, sign};
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    auto* scratch = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * s.size()));
    fftw_plan plan = nullptr;
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    if (axes == Axes::spatial) {
      const int n[2] = {static_cast<int>(s.h), static_cast<int>(s.w)};
      const int stride = static_cast<int>(s.t);
      plan = fftw_plan_many_dft(2, n, stride, scratch, nullptr, stride, 1, scratch, nullptr, stride, 1, sign,
                                flags);
    } else {
      const int n[1] = {static_cast<int>(s.t)};
      const int howmany = static_cast<int>(s.frame_size());
      const int dist = static_cast<int>(s.t);
      plan = fftw_plan_many_dft(1, n, howmany, scratch, nullptr, 1, dist, scratch, nullptr, 1, dist, sign, flags);
    }
    fftw_free(scratch);
    if (plan == nullptr) throw NumericalFailure("FFTW could not create a plan for shape " + s.str());
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  using Key = std::tuple<int, std::size_t, std::size_t, std::size_t, int>;
  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

void run(Axes axes, const Shape3T& shape, std::span<cplx> data, FftDirection dir, double n) {
  if (data.size() != shape.size()) {
    throw InvalidArgument("fft: buffer length does not match shape " + shape.str());
  }
  const int sign = dir == FftDirection::forward ? FFTW_FORWARD : FFTW_BACKWARD;
  fftw_plan plan = PlanCache::instance().get(axes, shape, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, buf, buf);
  const double norm = 1.0 / std::sqrt(n);
  for (cplx& v : data) v *= norm;
}

}  // namespace

void fft2_frames_inplace(const Shape3T& shape, std::span<cplx> data, FftDirection dir) {
  run(Axes::spatial, shape, data, dir, static_cast<double>(shape.frame_size()));
}

void fft_temporal_inplace(const Shape3T& shape, std::span<cplx> data, FftDirection dir) {
  run(Axes::temporal, shape, data, dir, static_cast<double>(shape.t));
}

DynVolume fft2_frames(const DynVolume& v, FftDirection dir) {
  DynVolume out = v;
  fft2_frames_inplace(out.shape(), out.data(), dir);
  return out;
}

}  // namespace dus
