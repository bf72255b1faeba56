#pragma once

#include <vector>

#include <Eigen/Dense>

#include "latplan/geometry.hpp"
#include "latplan/motion_model.hpp"

namespace latplan {

/// Motion and measurement noise; measurements are unavailable inside denied regions.
struct NoiseModel {
  StateMat M = 0.01 * StateMat::Identity();
  StateMat N_free = 0.01 * StateMat::Identity();
  std::vector<Box> denied_regions;

  bool denied(const Vec2& p) const {
    for (const Box& b : denied_regions)
      if (b.contains(p)) return true;
    return false;
  }
};

/// LQR weights for the execution controller.
struct LqgWeights {
  StateMat Q = StateMat::Identity();
  Eigen::Matrix2d R = Eigen::Matrix2d::Identity();
};

/// Gaussian belief under closed-loop execution.
///
/// `estimation` is the Kalman error covariance and `deviation` the covariance
/// of the estimate around the nominal; the true-state covariance is their sum.
struct Belief {
  StateVec mean = StateVec::Zero();
  StateMat estimation = StateMat::Zero();
  StateMat deviation = StateMat::Zero();

  StateMat sigma() const { return estimation + deviation; }
};

inline double uncertainty_trace(const StateMat& sigma) { return sigma.trace(); }

/// Symmetrizes and clamps small negative eigenvalues; throws below -1e-9.
inline StateMat make_psd(const StateMat& m, const char* what = "covariance") {
  StateMat s = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<StateMat> es(s);
  const Eigen::Vector3d ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -1e-9 * scale) throw Error(std::string(what) + " is not positive semi-definite");
  if (ev.minCoeff() >= 0.0) return s;
  const Eigen::Vector3d clamped = ev.cwiseMax(0.0);
  StateMat out = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

/// Linearization and LQR feedback along one primitive; independent of where it is anchored.
struct LqgSchedule {
  std::vector<StateMat> A;
  std::vector<InputMat> B;
  std::vector<Eigen::Matrix<double, 2, 3>> L;  // u = u_nominal + L (x_hat - x_nominal)
};

inline LqgSchedule compute_schedule(const MotionPrimitive& prim, const RobotModel& model,
                                    const LqgWeights& w = {}) {
  const std::size_t K = prim.controls.size();
  LqgSchedule s;
  s.A.resize(K);
  s.B.resize(K);
  s.L.resize(K);
  for (std::size_t t = 0; t < K; ++t) {
    const Pose& p = prim.poses[t];
    std::tie(s.A[t], s.B[t]) =
        model.linearize(StateVec(p.x, p.y, p.theta), ControlVec(prim.controls[t].v, prim.controls[t].omega));
  }
  StateMat S = w.Q;
  for (std::size_t i = K; i-- > 0;) {
    const StateMat& A = s.A[i];
    const InputMat& B = s.B[i];
    const Eigen::Matrix2d G = B.transpose() * S * B + w.R;
    s.L[i] = -G.ldlt().solve(B.transpose() * S * A);
    S = w.Q + A.transpose() * S * (A + B * s.L[i]);
    S = 0.5 * (S + S.transpose());
  }
  return s;
}

/// Predicted beliefs at every primitive pose (index 0 is the start) plus the
/// Kalman gains used, so execution can replay the same filter.
struct BeliefTrajectory {
  std::vector<Belief> beliefs;
  std::vector<StateMat> kalman_gain;  // kalman_gain[t] applied when arriving at pose t (t >= 1)
  std::vector<bool> measured;

  const Belief& final() const { return beliefs.back(); }
};

/// Predicts the state distribution along `prim` executed from `anchor` under LQG control.
inline BeliefTrajectory propagate(const Belief& start, const MotionPrimitive& prim, const Vec2& anchor,
                                  const LqgSchedule& sched, const NoiseModel& noise) {
  const std::size_t K = prim.controls.size();
  BeliefTrajectory out;
  out.beliefs.reserve(K + 1);
  out.kalman_gain.assign(K + 1, StateMat::Zero());
  out.measured.assign(K + 1, false);

  Belief b;
  b.estimation = make_psd(start.estimation, "start covariance");
  b.deviation = make_psd(start.deviation, "start covariance");
  b.mean = StateVec(anchor.x() + prim.poses[0].x, anchor.y() + prim.poses[0].y, prim.poses[0].theta);
  out.beliefs.push_back(b);

  for (std::size_t t = 0; t < K; ++t) {
    const StateMat& A = sched.A[t];
    const StateMat closed = A + sched.B[t] * sched.L[t];
    const Pose& next = prim.poses[t + 1];
    Belief nb;
    nb.mean = StateVec(anchor.x() + next.x, anchor.y() + next.y, next.theta);
    const StateMat predicted = A * b.estimation * A.transpose() + noise.M;
    StateMat gain = StateMat::Zero();
    if (!noise.denied(Vec2(nb.mean(0), nb.mean(1)))) {
      const StateMat innovation = predicted + noise.N_free;
      const double scale = innovation.cwiseAbs().maxCoeff();
      if (scale > 1e-300) {
        Eigen::LDLT<StateMat> ldlt(innovation);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 1e-14 * scale)
          throw Error("singular innovation covariance");
        gain = ldlt.solve(predicted).transpose();  // predicted * innovation^-1 (both symmetric)
        out.measured[t + 1] = true;
      }
    }
    const StateMat I_K = StateMat::Identity() - gain;
    nb.estimation = make_psd(I_K * predicted * I_K.transpose() + gain * noise.N_free * gain.transpose());
    nb.deviation = make_psd(closed * b.deviation * closed.transpose() + gain * predicted);
    out.kalman_gain[t + 1] = gain;
    out.beliefs.push_back(nb);
    b = nb;
  }
  return out;
}

inline BeliefTrajectory propagate(const Belief& start, const MotionPrimitive& prim, const Vec2& anchor,
                                  const RobotModel& model, const NoiseModel& noise, const LqgWeights& w = {}) {
  return propagate(start, prim, anchor, compute_schedule(prim, model, w), noise);
}

}  // namespace latplan
