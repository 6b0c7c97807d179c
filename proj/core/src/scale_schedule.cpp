#include "nsarm/scale_schedule.hpp"

#include <cmath>
#include <sstream>

namespace nsarm {

namespace {

struct Preset {
  std::vector<std::size_t> pixel_sides;
  std::size_t factor;
  std::size_t k_t;
};

Preset preset(int target_side) {
  switch (target_side) {
    case 1024:
      return {{16, 32, 64, 96, 128, 192, 256, 320, 384, 512, 640, 768, 1024}, 16, 7};
    case 64:
      return {{4, 8, 16, 24, 32, 48, 64}, 4, 3};
    default:
      throw ScheduleError("unsupported schedule preset " + std::to_string(target_side) + " (supported: 64, 1024)");
  }
}

}  // namespace

std::vector<std::size_t> preset_pixel_sides(int target_side) { return preset(target_side).pixel_sides; }

ScaleSchedule infinity_default_schedule(int target_side, std::size_t latent_dim) {
  const Preset p = preset(target_side);
  ScaleSchedule s;
  for (std::size_t side : p.pixel_sides) s.scales.push_back({side / p.factor, side / p.factor});
  s.k_t = p.k_t;
  s.latent_dim = latent_dim;
  s.pixel_factor = p.factor;
  return s;
}

ScaleSchedule proportional_schedule(int target_side, Extent latent, std::size_t latent_dim) {
  const ScaleSchedule square = infinity_default_schedule(target_side, latent_dim);
  const double top = static_cast<double>(square.last().h);
  ScaleSchedule s;
  s.latent_dim = latent_dim;
  s.pixel_factor = square.pixel_factor;
  for (std::size_t k = 1; k <= square.size(); ++k) {
    const double r = static_cast<double>(square.scale(k).h) / top;
    Extent e{std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(r * static_cast<double>(latent.h)))),
             std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(r * static_cast<double>(latent.w))))};
    if (!s.scales.empty() && s.scales.back() == e) {
      // rounding collapsed two scales; keep one
      if (k <= square.k_t) s.k_t = s.scales.size();
      continue;
    }
    s.scales.push_back(e);
    if (k == square.k_t) s.k_t = s.scales.size();
  }
  s.scales.back() = latent;
  if (s.k_t >= s.scales.size()) s.k_t = s.scales.size() - 1;
  validate(s, latent);
  return s;
}

void validate(const ScaleSchedule& schedule, Extent latent) {
  const auto& sc = schedule.scales;
  if (sc.empty()) throw ScheduleError("schedule has no scales");
  if (schedule.latent_dim == 0) throw ScheduleError("latent_dim must be positive");
  for (std::size_t k = 0; k < sc.size(); ++k) {
    if (sc[k].h == 0 || sc[k].w == 0) throw ScheduleError("scale " + std::to_string(k + 1) + " has a zero side");
    if (k > 0) {
      const Extent& a = sc[k - 1];
      const Extent& b = sc[k];
      if (b.h < a.h || b.w < a.w) throw ScheduleError("scale " + std::to_string(k + 1) + " decreases in resolution");
      if (b == a) throw ScheduleError("scale " + std::to_string(k + 1) + " does not grow");
    }
  }
  if (!(sc.back() == latent)) {
    throw ScheduleError("last scale " + std::to_string(sc.back().h) + "x" + std::to_string(sc.back().w) +
                        " does not match latent " + std::to_string(latent.h) + "x" + std::to_string(latent.w));
  }
  if (sc.size() > 1 && (schedule.k_t < 1 || schedule.k_t >= sc.size())) {
    throw ScheduleError("k_t = " + std::to_string(schedule.k_t) + " out of range [1, " + std::to_string(sc.size() - 1) + "]");
  }
  if (sc.size() == 1 && schedule.k_t != 1) throw ScheduleError("single-scale schedule requires k_t = 1");
}

void validate_preliminary(const ScaleSchedule& schedule, Extent lr_latent) {
  validate(schedule, schedule.last());
  if (!(schedule.preliminary() == lr_latent)) {
    throw ScheduleError("scale k_t = " + std::to_string(schedule.k_t) + " (" + std::to_string(schedule.preliminary().h) +
                        "x" + std::to_string(schedule.preliminary().w) + ") does not match the LR latent " +
                        std::to_string(lr_latent.h) + "x" + std::to_string(lr_latent.w));
  }
}

std::size_t token_count(const ScaleSchedule& schedule, std::size_t from_k, std::size_t to_k) {
  if (from_k < 1 || from_k > to_k || to_k > schedule.size()) {
    throw ScheduleError("token_count range [" + std::to_string(from_k) + ", " + std::to_string(to_k) +
                        "] out of bounds for " + std::to_string(schedule.size()) + " scales");
  }
  std::size_t n = 0;
  for (std::size_t k = from_k; k <= to_k; ++k) n += schedule.scale(k).h * schedule.scale(k).w;
  return n;
}

std::string to_string(const ScaleSchedule& schedule) {
  std::ostringstream os;
  for (std::size_t k = 0; k < schedule.scales.size(); ++k) {
    if (k) os << ',';
    os << schedule.scales[k].h << 'x' << schedule.scales[k].w;
  }
  os << ";k_t=" << schedule.k_t << ";d=" << schedule.latent_dim << ";factor=" << schedule.pixel_factor;
  return os.str();
}

ScaleSchedule parse_schedule(const std::string& text) {
  ScaleSchedule s;
  std::istringstream parts(text);
  std::string part;
  bool first = true;
  while (std::getline(parts, part, ';')) {
    if (first) {
      first = false;
      std::istringstream scales(part);
      std::string item;
      while (std::getline(scales, item, ',')) {
        const auto x = item.find('x');
        if (x == std::string::npos) throw ScheduleError("bad scale entry '" + item + "'");
        try {
          s.scales.push_back({std::stoul(item.substr(0, x)), std::stoul(item.substr(x + 1))});
        } catch (const std::logic_error&) {
          throw ScheduleError("bad scale entry '" + item + "'");
        }
      }
      continue;
    }
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ScheduleError("bad schedule field '" + part + "'");
    const std::string key = part.substr(0, eq);
    std::size_t value = 0;
    try {
      value = std::stoul(part.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw ScheduleError("bad schedule field '" + part + "'");
    }
    if (key == "k_t") {
      s.k_t = value;
    } else if (key == "d") {
      s.latent_dim = value;
    } else if (key == "factor") {
      s.pixel_factor = value;
    } else {
      throw ScheduleError("unknown schedule field '" + key + "'");
    }
  }
  if (s.scales.empty()) throw ScheduleError("schedule string has no scales");
  validate(s, s.last());
  return s;
}

}  // namespace nsarm
