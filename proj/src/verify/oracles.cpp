#include "vhsim/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>
#include <numbers>

namespace vhsim::oracle {

namespace {

Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& r, const Eigen::Vector3d& p) {
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() = r;
  t.topRightCorner<3, 1>() = p;
  return t;
}

Eigen::Matrix4d joint_transform(const JointSpec& joint, double q) {
  if (joint.kind == JointKind::revolute) {
    return homogeneous(Eigen::AngleAxisd(q, joint.axis).toRotationMatrix(), Eigen::Vector3d::Zero());
  }
  return homogeneous(Eigen::Matrix3d::Identity(), q * joint.axis);
}

/// Axis-angle vector of a rotation matrix through Eigen's AngleAxis.
Eigen::Vector3d rotation_vector(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

}  // namespace

std::vector<Eigen::Matrix4d> compose_frames(const KinematicChain& chain, const SimState& state) {
  const auto& links = chain.links();
  std::vector<Eigen::Matrix4d> frames(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    const LinkSpec& link = links[i];
    const Eigen::Matrix4d parent = link.parent < 0 ? Eigen::Matrix4d::Identity() : frames[static_cast<std::size_t>(link.parent)];
    const Eigen::Matrix4d offset = link.offset.matrix();
    Eigen::Matrix4d motion;
    if (link.joint.kind == JointKind::floating_base) {
      motion = homogeneous(state.base_orientation.normalized().toRotationMatrix(), state.base_position);
    } else {
      motion = joint_transform(link.joint, state.joints[chain.coordinate_index(static_cast<int>(i))]);
    }
    frames[i] = parent * offset * motion;
  }
  return frames;
}

Eigen::MatrixXd finite_difference_jacobian(const KinematicChain& chain, const SimState& state, int link,
                                           const Eigen::Vector3d& local_point, double h) {
  const int n = chain.dof();
  Eigen::MatrixXd jac(6, n);
  auto perturbed = [&](int column, double step) {
    SimState s = state;
    if (chain.has_floating_base() && column < 6) {
      Eigen::Matrix<double, 6, 1> xi = Eigen::Matrix<double, 6, 1>::Zero();
      xi[column] = step;
      const Eigen::Vector3d w = xi.tail<3>();
      const Eigen::Matrix3d dr =
          w.norm() > 0.0 ? Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix() : Eigen::Matrix3d::Identity();
      s.base_position = state.base_position + state.base_orientation * Eigen::Vector3d(xi.head<3>());
      s.base_orientation = Eigen::Quaterniond(state.base_orientation.toRotationMatrix() * dr);
    } else {
      int link_index = -1;
      for (std::size_t i = 0; i < chain.links().size(); ++i) {
        if (chain.links()[i].joint.kind != JointKind::floating_base &&
            chain.velocity_index(static_cast<int>(i)) == column) {
          link_index = static_cast<int>(i);
        }
      }
      s.joints[chain.coordinate_index(link_index)] += step;
    }
    return compose_frames(chain, s)[static_cast<std::size_t>(link)];
  };
  for (int c = 0; c < n; ++c) {
    const Eigen::Matrix4d plus = perturbed(c, h);
    const Eigen::Matrix4d minus = perturbed(c, -h);
    const Eigen::Vector3d p_plus = plus.topLeftCorner<3, 3>() * local_point + plus.topRightCorner<3, 1>();
    const Eigen::Vector3d p_minus = minus.topLeftCorner<3, 3>() * local_point + minus.topRightCorner<3, 1>();
    jac.block<3, 1>(0, c) = (p_plus - p_minus) / (2.0 * h);
    const Eigen::Matrix3d rel = plus.topLeftCorner<3, 3>() * minus.topLeftCorner<3, 3>().transpose();
    jac.block<3, 1>(3, c) = rotation_vector(rel) / (2.0 * h);
  }
  return jac;
}

std::optional<EnumeratedLcp> enumerate_lcp(const Eigen::MatrixXd& m, const Eigen::VectorXd& w, double tol) {
  const int size = static_cast<int>(w.size());
  std::vector<unsigned> masks(1u << size);
  for (unsigned i = 0; i < masks.size(); ++i) masks[i] = i;
  std::stable_sort(masks.begin(), masks.end(),
                   [](unsigned a, unsigned b) { return std::popcount(a) < std::popcount(b); });
  for (unsigned mask : masks) {
    std::vector<int> active;
    for (int i = 0; i < size; ++i) {
      if (mask & (1u << i)) active.push_back(i);
    }
    Eigen::VectorXd f = Eigen::VectorXd::Zero(size);
    if (!active.empty()) {
      const int k = static_cast<int>(active.size());
      Eigen::MatrixXd maa(k, k);
      Eigen::VectorXd wa(k);
      for (int a = 0; a < k; ++a) {
        wa[a] = w[active[a]];
        for (int b = 0; b < k; ++b) maa(a, b) = m(active[a], active[b]);
      }
      // Minimum-norm solution; consistency is checked through the slack below.
      const Eigen::VectorXd fa = maa.completeOrthogonalDecomposition().solve(-wa);
      for (int a = 0; a < k; ++a) f[active[a]] = fa[a];
    }
    const Eigen::VectorXd slack = m * f + w;
    bool ok = true;
    for (int i = 0; i < size && ok; ++i) {
      const bool in = (mask & (1u << i)) != 0;
      if (f[i] < -tol || slack[i] < -tol) ok = false;
      if (in && std::abs(slack[i]) > tol) ok = false;
      if (!in && f[i] != 0.0) ok = false;
    }
    if (ok) return EnumeratedLcp{f, slack};
  }
  return std::nullopt;
}

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) a(i, j) = normal(rng);
  }
  return a;
}

Eigen::MatrixXd random_psd(int m, int rank, std::mt19937_64& rng) {
  const Eigen::MatrixXd a = random_matrix(m, std::min(rank, m), rng);
  const Eigen::MatrixXd p = a * a.transpose();
  return 0.5 * (p + p.transpose());
}

Eigen::MatrixXd random_spd(int n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(n, n, rng));
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = u(rng);
  const Eigen::MatrixXd s = q * d.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

KinematicChain random_chain(int n, bool floating_base, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution prismatic(0.25);
  std::vector<LinkSpec> links;
  if (floating_base) {
    LinkSpec base;
    base.name = "base";
    base.joint.kind = JointKind::floating_base;
    links.push_back(base);
  }
  for (int i = 0; i < n; ++i) {
    LinkSpec link;
    link.name = "link" + std::to_string(i);
    link.parent = static_cast<int>(links.size()) - 1;
    Eigen::Vector3d axis(u(rng), u(rng), u(rng));
    if (axis.norm() < 1e-3) axis = Eigen::Vector3d::UnitZ();
    link.joint.axis = axis.normalized();
    link.joint.kind = prismatic(rng) ? JointKind::prismatic : JointKind::revolute;
    const Eigen::Vector3d rv(u(rng), u(rng), u(rng));
    link.offset = Eigen::Isometry3d::Identity();
    link.offset.linear() = Eigen::AngleAxisd(rv.norm(), rv.normalized()).toRotationMatrix();
    link.offset.translation() = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.4;
    link.length = 0.3;
    links.push_back(link);
  }
  const int dof = n + (floating_base ? 6 : 0);
  return KinematicChain("random", std::move(links), Eigen::MatrixXd::Identity(dof, dof));
}

SimState random_state(const KinematicChain& chain, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  SimState s = make_state(chain);
  for (std::size_t i = 0; i < chain.links().size(); ++i) {
    const LinkSpec& link = chain.links()[i];
    if (link.joint.kind == JointKind::floating_base) {
      const Eigen::Vector3d rv(u(rng), u(rng), u(rng));
      s.base_orientation = Eigen::Quaterniond(Eigen::AngleAxisd(rv.norm() / 2.0, rv.normalized()));
      s.base_position = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.3;
      continue;
    }
    double q = u(rng);
    if (link.limit) {
      std::uniform_real_distribution<double> in(link.limit->lower, link.limit->upper);
      q = in(rng);
    }
    s.joints[chain.coordinate_index(static_cast<int>(i))] = q;
  }
  return s;
}

}  // namespace vhsim::oracle
