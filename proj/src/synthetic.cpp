#include "mogen/motion/synthetic.hpp"

#include <cmath>

#include "mogen/core/rng.hpp"

namespace mogen::motion {

namespace {

using Vec3 = Eigen::Vector3d;

struct ClipParams {
  int family = 0;
  double speed = 0.0;        // m/s along the path (walk/turn)
  double turn_rate = 0.0;    // rad/s yaw
  double step_hz = 0.0;      // gait cadence, steps per second
  double arm_amp = 0.0;      // walking arm swing, rad
  double osc_hz = 0.0;       // wave/clap/flex oscillation
  double osc_amp = 0.0;
  double phase = 0.0;
  double height = 0.95;      // pelvis rest height
};

constexpr double kFps = 30.0;
constexpr double kStanceDuty = 0.6;
constexpr double kHipWidth = 0.09;
constexpr double kToeLen = 0.13;

// Rotation about +Y by psi applied to a local (x, z) pair; +Z maps toward +X.
inline void rot_y(double psi, double lx, double lz, double& wx, double& wz) {
  const double c = std::cos(psi), s = std::sin(psi);
  wx = c * lx + s * lz;
  wz = -s * lx + c * lz;
}

// Root path. Straight line for |turn_rate| ~ 0, otherwise a circular arc.
struct Path {
  double v, omega;
  double psi(double t) const { return omega * t; }
  void pos(double t, double& x, double& z) const {
    if (std::abs(omega) < 1e-9) {
      x = 0.0;
      z = v * t;
    } else {
      x = (v / omega) * (1.0 - std::cos(omega * t));
      z = (v / omega) * std::sin(omega * t);
    }
  }
};

double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

// Foot pin for stance index k: the world point the foot keeps for the whole
// stance. side = +1 left, -1 right.
Vec3 foot_pin(const Path& path, double period, double foot_phase, int k, double side) {
  const double t_mid = (static_cast<double>(k) + kStanceDuty * 0.5 - foot_phase) * period;
  double x, z;
  path.pos(t_mid, x, z);
  const double psi = path.psi(t_mid);
  double ox, oz;
  rot_y(psi, side * kHipWidth, 0.02, ox, oz);
  return Vec3(x + ox, 0.08, z + oz);
}

struct FootState {
  Vec3 ankle;
  Vec3 toe;
  bool stance;
  int pin_index;
};

FootState foot_at(const Path& path, double period, double foot_phase, double t, double side,
                  bool moving) {
  FootState st;
  if (!moving) {
    double ox, oz;
    rot_y(0.0, side * kHipWidth, 0.02, ox, oz);
    st.ankle = Vec3(ox, 0.08, oz);
    st.toe = st.ankle + Vec3(0, -0.06, kToeLen);
    st.stance = true;
    st.pin_index = 0;
    return st;
  }
  const double cyc = t / period + foot_phase;
  const int k = static_cast<int>(std::floor(cyc));
  const double u = cyc - std::floor(cyc);
  const Vec3 pin = foot_pin(path, period, foot_phase, k, side);
  auto psi_mid = [&](int kk) {
    return path.psi((static_cast<double>(kk) + kStanceDuty * 0.5 - foot_phase) * period);
  };
  auto toe_offset = [&](double heading) {
    double tx, tz;
    rot_y(heading, 0.0, kToeLen, tx, tz);
    return Vec3(tx, -0.06, tz);
  };
  st.pin_index = k;
  if (u < kStanceDuty) {
    st.stance = true;
    st.ankle = pin;
    st.toe = pin + toe_offset(psi_mid(k));
  } else {
    st.stance = false;
    const Vec3 next = foot_pin(path, period, foot_phase, k + 1, side);
    const double s = (u - kStanceDuty) / (1.0 - kStanceDuty);
    // constant clearance keeps the swing foot's speed above the contact
    // threshold even right at the phase boundaries
    const double lift = 0.012 + 0.078 * std::sin(M_PI * s);
    st.ankle = pin + (next - pin) * smoothstep(s) + Vec3(0, lift, 0);
    // toe heading turns smoothly toward the next stance direction
    const double heading = psi_mid(k) + (psi_mid(k + 1) - psi_mid(k)) * smoothstep(s);
    st.toe = st.ankle + toe_offset(heading);
  }
  return st;
}

// World positions of all 52 joints at time t plus the root state.
void pose_at(const ClipParams& p, double t, Matd& joints, Index frame, double& out_psi,
             Vec3& out_root) {
  const bool moving = p.family <= 1;  // walk, turn
  Path path{moving ? p.speed : 0.0, p.family == 1 ? p.turn_rate : 0.0};

  double rx = 0.0, rz = 0.0;
  path.pos(t, rx, rz);
  const double psi = moving ? path.psi(t) : 0.0;
  const double bob = moving ? 0.022 * std::sin(2.0 * M_PI * p.step_hz * t + p.phase) : 0.0;
  const double sway = moving ? 0.018 * std::sin(M_PI * p.step_hz * t + p.phase) : 0.0;
  double swx, swz;
  rot_y(psi, sway, 0.0, swx, swz);
  const Vec3 root(rx + swx, p.height + bob, rz + swz);

  auto place = [&](int j, const Vec3& world) {
    joints(frame, 3 * j) = world.x();
    joints(frame, 3 * j + 1) = world.y();
    joints(frame, 3 * j + 2) = world.z();
  };
  // local offset from root, rotated by heading
  auto place_local = [&](int j, double lx, double ly, double lz) {
    double wx, wz;
    rot_y(psi, lx, lz, wx, wz);
    place(j, root + Vec3(wx, ly, wz));
  };

  place(0, root);
  place_local(1, kHipWidth, -0.05, 0.0);
  place_local(2, -kHipWidth, -0.05, 0.0);
  place_local(3, 0.0, 0.12, 0.01);
  place_local(6, 0.0, 0.24, 0.015);
  place_local(9, 0.0, 0.36, 0.02);
  place_local(12, 0.0, 0.46, 0.01);
  place_local(13, 0.06, 0.41, 0.02);
  place_local(14, -0.06, 0.41, 0.02);
  place_local(15, 0.0, 0.57, 0.02);
  place_local(16, 0.17, 0.40, 0.0);
  place_local(17, -0.17, 0.40, 0.0);

  // legs
  const double period = p.step_hz > 0 ? 2.0 / p.step_hz : 1.0;
  const FootState lf = foot_at(path, period, 0.0, t, +1.0, moving);
  const FootState rf = foot_at(path, period, 0.5, t, -1.0, moving);
  place(7, lf.ankle);
  place(10, lf.toe);
  place(8, rf.ankle);
  place(11, rf.toe);
  // knees: midway hip-ankle with forward bend tied to the foot lift so the
  // bend stays continuous through phase changes
  auto knee = [&](int hip_j, const FootState& f, int knee_j) {
    Vec3 hip(joints(frame, 3 * hip_j), joints(frame, 3 * hip_j + 1), joints(frame, 3 * hip_j + 2));
    const double lift = std::max(0.0, f.ankle.y() - 0.08);
    double bx, bz;
    rot_y(psi, 0.0, 0.06 + lift, bx, bz);
    place(knee_j, (hip + f.ankle) * 0.5 + Vec3(bx, 0.0, bz));
  };
  knee(1, lf, 4);
  knee(2, rf, 5);

  // arms
  double l_elbow_x = 0.19, l_elbow_y = 0.14, l_elbow_z = 0.0;
  double r_elbow_x = -0.19, r_elbow_y = 0.14, r_elbow_z = 0.0;
  double l_wrist_x = 0.20, l_wrist_y = -0.10, l_wrist_z = 0.0;
  double r_wrist_x = -0.20, r_wrist_y = -0.10, r_wrist_z = 0.0;
  const double wobble = std::sin(2.0 * M_PI * p.osc_hz * t + p.phase);
  switch (p.family) {
    case 0:
    case 1: {  // swing with the gait, arms opposite legs
      const double a = p.arm_amp * std::sin(M_PI * p.step_hz * t + p.phase);
      l_elbow_z = 0.10 * std::sin(a);
      r_elbow_z = -0.10 * std::sin(a);
      l_wrist_z = 0.30 * std::sin(a);
      r_wrist_z = -0.30 * std::sin(a);
      l_wrist_y = -0.12 + 0.05 * std::cos(a);
      r_wrist_y = -0.12 + 0.05 * std::cos(a);
      break;
    }
    case 2: {  // wave: right arm raised, lateral oscillation
      r_elbow_x = -0.26;
      r_elbow_y = 0.26;
      r_elbow_z = 0.05;
      r_wrist_x = -0.26 + p.osc_amp * wobble;
      r_wrist_y = 0.50;
      r_wrist_z = 0.08;
      break;
    }
    case 3: {  // clap: wrists meet in front of the chest
      const double gap = 0.05 + 0.16 * std::abs(std::sin(M_PI * p.osc_hz * t + p.phase));
      l_elbow_x = 0.24;
      r_elbow_x = -0.24;
      l_elbow_z = r_elbow_z = 0.14;
      l_elbow_y = r_elbow_y = 0.18;
      l_wrist_x = gap;
      r_wrist_x = -gap;
      l_wrist_y = r_wrist_y = 0.22;
      l_wrist_z = r_wrist_z = 0.30;
      break;
    }
    default: {  // hand open/close: forearms forward, still
      l_elbow_z = r_elbow_z = 0.10;
      l_wrist_x = 0.18;
      r_wrist_x = -0.18;
      l_wrist_y = r_wrist_y = 0.05;
      l_wrist_z = r_wrist_z = 0.28;
      break;
    }
  }
  place_local(18, l_elbow_x, l_elbow_y, l_elbow_z);
  place_local(19, r_elbow_x, r_elbow_y, r_elbow_z);
  place_local(20, l_wrist_x, l_wrist_y, l_wrist_z);
  place_local(21, r_wrist_x, r_wrist_y, r_wrist_z);

  // fingers: 5 fingers x 3 segments per hand, curled by gamma in [0, 1]
  double gamma = 0.3;
  if (p.family == 2) gamma = 0.12;
  if (p.family == 4) gamma = 0.5 + 0.5 * wobble;
  auto hand = [&](int wrist_j, int start_j, double side) {
    Vec3 wrist(joints(frame, 3 * wrist_j), joints(frame, 3 * wrist_j + 1),
               joints(frame, 3 * wrist_j + 2));
    for (int f = 0; f < 5; ++f) {
      const double spread = (f - 2) * 0.018 * side;
      double sx, sz;
      rot_y(psi, spread, 0.035, sx, sz);
      Vec3 pos = wrist + Vec3(sx, -0.015, sz);
      double ang = 0.0;
      for (int seg = 0; seg < 3; ++seg) {
        const int j = start_j + f * 3 + seg;
        ang += gamma * (0.45 + 0.35 * seg);
        double dx, dz;
        rot_y(psi, 0.0, 0.026 * std::cos(ang), dx, dz);
        pos += Vec3(dx, -0.026 * std::sin(ang), dz);
        joints(frame, 3 * j) = pos.x();
        joints(frame, 3 * j + 1) = pos.y();
        joints(frame, 3 * j + 2) = pos.z();
      }
    }
  };
  hand(joints::kLeftWrist, joints::kLeftHandStart, +1.0);
  hand(joints::kRightWrist, joints::kRightHandStart, -1.0);

  out_psi = psi;
  out_root = root;
}

}  // namespace

const char* family_name(int family) {
  switch (family) {
    case 0: return "walk";
    case 1: return "turn";
    case 2: return "wave";
    case 3: return "clap";
    default: return "open and close hands";
  }
}

SyntheticClip generate_synthetic_clip(std::uint64_t seed, int family, int L) {
  require(L >= 8, "generate_synthetic_clip: clip_len_frames >= 8");
  Rng rng(seed);
  // parameters come from small discrete palettes: the clip space stays
  // combinatorially rich while each 4-frame snippet recurs across the corpus
  auto pick = [&rng](std::initializer_list<double> vals) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(static_cast<Index>(vals.size())));
    return *(vals.begin() + static_cast<std::ptrdiff_t>(i));
  };
  ClipParams p;
  p.family = family;
  p.phase = 2.0 * M_PI * pick({0.0, 0.25, 0.5, 0.75});
  p.height = pick({0.94, 1.00});
  switch (family) {
    case 0:
      p.speed = pick({0.8, 1.0, 1.2, 1.4});
      p.step_hz = pick({1.6, 1.875, 2.1});
      p.arm_amp = pick({0.35, 0.5, 0.6});
      p.osc_hz = p.step_hz;
      break;
    case 1:
      p.speed = pick({0.6, 0.8, 1.0});
      p.turn_rate = pick({-0.9, -0.6, 0.6, 0.9});
      p.step_hz = pick({1.6, 1.875});
      p.arm_amp = pick({0.3, 0.45});
      p.osc_hz = p.step_hz;
      break;
    case 2:
      p.osc_hz = pick({1.5, 1.875, 2.25});
      p.osc_amp = pick({0.12, 0.16, 0.2});
      break;
    case 3:
      p.osc_hz = pick({1.25, 1.5, 1.875});
      break;
    default:
      p.osc_hz = pick({0.9375, 1.25, 1.5});
      break;
  }

  const int J = joints::kWholeBody;
  Matd world(L, J * 3);
  Vecd psi(L);
  Matd root(L, 3);
  for (Index i = 0; i < L; ++i) {
    double ps;
    Vec3 rt;
    pose_at(p, static_cast<double>(i) / kFps, world, i, ps, rt);
    psi(i) = ps;
    root.row(i) = rt.transpose();
  }
  // canonicalize: clips start with the root on the XZ origin
  const double ox = root(0, 0), oz = root(0, 2);
  root.col(0).array() -= ox;
  root.col(2).array() -= oz;
  for (int j = 0; j < J; ++j) {
    world.col(3 * j).array() -= ox;
    world.col(3 * j + 2).array() -= oz;
  }

  SyntheticClip clip;
  clip.family = family_name(family);
  clip.text = clip.family;
  clip.cycle_hz = family <= 1 ? p.step_hz : p.osc_hz;
  clip.world_joints = world;

  // analytic contact phase (same frame-pair convention as compute_foot_contacts)
  clip.contact_gt = Mati::Ones(L, 4);
  if (family <= 1) {
    const double period = 2.0 / p.step_hz;
    auto stance_of = [&](double t, double phase, int& pin) {
      const double cyc = t / period + phase;
      pin = static_cast<int>(std::floor(cyc));
      return (cyc - std::floor(cyc)) < kStanceDuty;
    };
    for (Index i = 0; i < L; ++i) {
      const Index j = std::min<Index>(i, L - 2);
      const double t0 = static_cast<double>(j) / kFps;
      const double t1 = static_cast<double>(j + 1) / kFps;
      int k0, k1, k2, k3;
      const bool l0 = stance_of(t0, 0.0, k0), l1 = stance_of(t1, 0.0, k1);
      const bool r0 = stance_of(t0, 0.5, k2), r1 = stance_of(t1, 0.5, k3);
      const int lc = (l0 && l1 && k0 == k1) ? 1 : 0;
      const int rc = (r0 && r1 && k2 == k3) ? 1 : 0;
      clip.contact_gt(i, 0) = lc;
      clip.contact_gt(i, 1) = lc;
      clip.contact_gt(i, 2) = rc;
      clip.contact_gt(i, 3) = rc;
    }
  }

  // representation extraction
  FeatureLayout lay = build_layout(J, false);
  Matd m = Matd::Zero(L, lay.d_m);
  const Mati contacts = compute_foot_contacts(world, J, kDefaultContactThreshold);
  Matd local(L, J * 3);  // root-local positions, root row keeps (0, height, 0)
  for (Index i = 0; i < L; ++i) {
    const double c = std::cos(psi(i)), s = std::sin(psi(i));
    for (int j = 0; j < J; ++j) {
      const double wx = world(i, 3 * j) - root(i, 0);
      const double wy = world(i, 3 * j + 1);
      const double wz = world(i, 3 * j + 2) - root(i, 2);
      // inverse heading rotation
      local(i, 3 * j) = c * wx - s * wz;
      local(i, 3 * j + 1) = j == 0 ? root(i, 1) : wy;
      local(i, 3 * j + 2) = s * wx + c * wz;
    }
    local(i, 0) = 0.0;
    local(i, 2) = 0.0;
  }
  const FieldSpan ra = lay.span("r_a"), rx = lay.span("r_x"), rz = lay.span("r_z"),
                  ry = lay.span("r_y"), jp = lay.span("j_p"), jv = lay.span("j_v"),
                  cs = lay.span("c");
  for (Index i = 0; i < L; ++i) {
    if (i > 0) {
      m(i, ra.start) = psi(i) - psi(i - 1);
      const double dx = root(i, 0) - root(i - 1, 0);
      const double dz = root(i, 2) - root(i - 1, 2);
      const double c = std::cos(psi(i - 1)), s = std::sin(psi(i - 1));
      m(i, rx.start) = c * dx - s * dz;
      m(i, rz.start) = s * dx + c * dz;
    }
    m(i, ry.start) = root(i, 1);
    for (int j = 1; j < J; ++j)
      for (int k = 0; k < 3; ++k) m(i, jp.start + 3 * (j - 1) + k) = local(i, 3 * j + k);
    for (int k = 0; k < 4; ++k) m(i, cs.start + k) = contacts(i, k);
  }
  for (Index i = 0; i < L; ++i) {
    const Index src = std::min<Index>(i, L - 2);
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < 3; ++k)
        m(i, jv.start + 3 * j + k) =
            (local(src + 1, 3 * j + k) - local(src, 3 * j + k)) * kFps;
  }

  clip.motion.layout = lay;
  clip.motion.data = std::move(m);

  // tempo-locked audio: carrier tone, amplitude modulated at the cycle rate
  const double carriers[kFamilyCount] = {220.0, 262.0, 330.0, 392.0, 524.0};
  const int sr = clip.audio_sample_rate;
  const int n_samp = static_cast<int>(std::lround(static_cast<double>(L) / kFps * sr));
  clip.audio.resize(static_cast<std::size_t>(n_samp));
  for (int i = 0; i < n_samp; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double env = 0.55 + 0.45 * std::sin(2.0 * M_PI * clip.cycle_hz * t + p.phase);
    clip.audio[static_cast<std::size_t>(i)] =
        static_cast<float>(env * std::sin(2.0 * M_PI * carriers[family] * t));
  }
  return clip;
}

std::vector<SyntheticClip> generate_synthetic_dataset(std::uint64_t seed, int n_clips,
                                                      int clip_len_frames) {
  require(n_clips >= 1, "generate_synthetic_dataset: n_clips >= 1");
  require(clip_len_frames >= 8, "generate_synthetic_dataset: clip_len_frames >= 8");
  Rng master(seed);
  std::vector<SyntheticClip> out;
  out.reserve(static_cast<std::size_t>(n_clips));
  for (int i = 0; i < n_clips; ++i) {
    Rng sub = master.split(static_cast<std::uint64_t>(i));
    out.push_back(generate_synthetic_clip(sub.next_u64(), i % kFamilyCount, clip_len_frames));
  }
  return out;
}

}  // namespace mogen::motion
