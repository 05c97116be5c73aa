#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "obsfront/error.hpp"

namespace obsfront {

using Vec = std::vector<double>;

// Vector field F on an open box around [0,1]^m. Implementations must be re-entrant.
class ReactionField {
 public:
  virtual ~ReactionField() = default;
  virtual int components() const = 0;
  virtual void eval(const double* u, double* f) const = 0;
  virtual bool has_jacobian() const { return false; }
  // Row-major m x m; only called when has_jacobian() is true.
  virtual void jacobian(const double* u, double* jac) const;
  // Structure-of-arrays batch: u[i][k] is component i at point k.
  virtual void eval_soa(const double* const* u, double* const* f, std::size_t n) const;
};

struct PFSeed {
  Eigen::VectorXd R0, R1;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  std::string source;
};

class SystemDef {
 public:
  SystemDef(std::string name, Vec diffusion, std::shared_ptr<const ReactionField> field,
            double box_lo = -0.5, double box_hi = 1.5);

  int m() const { return static_cast<int>(diffusion_.size()); }
  const Vec& D() const { return diffusion_; }
  double Dbar() const;
  double Dunder() const;
  const ReactionField& field() const { return *field_; }
  std::shared_ptr<const ReactionField> field_ptr() const { return field_; }
  const std::string& name() const { return name_; }
  double box_lo() const { return box_lo_; }
  double box_hi() const { return box_hi_; }

  // Perron-Frobenius data known in closed form for this system, if any.
  std::optional<PFSeed> pf_seed;

 private:
  std::string name_;
  Vec diffusion_;
  std::shared_ptr<const ReactionField> field_;
  double box_lo_, box_hi_;
};

Vec eval_field(const SystemDef& sys, std::span<const double> u);
Eigen::MatrixXd jacobian(const SystemDef& sys, std::span<const double> u);
Eigen::MatrixXd finite_difference_jacobian(const SystemDef& sys, std::span<const double> u);

// Built-in fields.
SystemDef cubic_pair(double a, int m = 2, Vec diffusion = {});
SystemDef monostable_probe();

struct Monomial {
  double coeff = 0.0;
  std::vector<int> exponents;
};
// terms[i] lists the monomials summed into F_i.
SystemDef polynomial_system(std::string name, Vec diffusion,
                            std::vector<std::vector<Monomial>> terms);

enum class Provenance { formula, estimated, config };
const char* to_string(Provenance p);

struct LedgerValue {
  double value = std::numeric_limits<double>::quiet_NaN();
  Provenance provenance = Provenance::estimated;
  std::string origin;
  bool known() const { return value == value; }
};

struct ConstantsLedger {
  LedgerValue Lambda, varpi, eps0, Dbar, Dunder, eta, a, b, c, L, M;
  Vec Lambda_at;
  Eigen::MatrixXd mu0, mu1;

  void set_front(double speed, double a_fit, double b_fit);
  void set_obstacle_radius(double radius, Provenance p, std::string origin);
  // eta = min(bc/2, varpi/2) once both inputs are known.
  void update_eta();
  std::vector<std::pair<std::string, LedgerValue>> entries() const;
};

struct PFData {
  Eigen::VectorXd R0, R1;
  double lambda0 = 0.0, lambda1 = 0.0;
  double eta0 = 0.0, eta1 = 0.0;
  double p_low = 0.0, p_high = 0.0;  // p_* = min eta0*R0, p^* = max R1
  double q_low = 0.0, q_high = 0.0;  // q_* = min eta1*R1, q^* = max R0
  std::string source;

  Eigen::VectorXd P0() const { return eta0 * R0; }
  Eigen::VectorXd P1() const { return R1; }
  Eigen::VectorXd Q0() const { return R0; }
  Eigen::VectorXd Q1() const { return eta1 * R1; }
};

// Fills eta0/eta1 (when zero) and the extremal entries. Throws scaling errors.
PFData complete_pf(PFData pf);

class PQFunctions {
 public:
  explicit PQFunctions(PFData pf);

  // Quintic smoothstep clamped to [0,1] and its derivatives.
  static double chi(double s);
  static double chi_d1(double s);
  static double chi_d2(double s);

  int m() const { return static_cast<int>(pf_.R0.size()); }
  double p(int i, double s, int deriv = 0) const;
  double q(int i, double s, int deriv = 0) const;
  double M() const { return M_; }
  const PFData& pf() const { return pf_; }

 private:
  PFData pf_;
  double M_ = 0.0;
};

PQFunctions build_pq(const PFData& pf);

struct AuditOptions {
  int lattice = 17;
  int random_samples = 10000;
  int ball_samples = 1000;
  std::uint64_t seed = 20240601;
  std::optional<PFSeed> pf_override;
  double eta0 = 0.0;  // 0 selects the default half-gap scaling
  double eta1 = 0.0;
};

struct AssumptionReport {
  bool a1_ok = false, a2_ok = false, a3_ok = false, a4_ok = false;
  Eigen::VectorXcd eig0, eig1;
  double abscissa0 = 0.0, abscissa1 = 0.0;
  double equilibrium_residual = 0.0;
  PFData pf;
  double a3_residual0 = 0.0, a3_residual1 = 0.0;
  double min_offdiag = 0.0;
  Vec min_offdiag_at;
  ConstantsLedger ledger;
  std::vector<std::string> notes;

  bool ok() const { return a1_ok && a2_ok && a3_ok && a4_ok; }
};

class AssumptionError : public Error {
 public:
  AssumptionError(ErrorCode code, const std::string& message, AssumptionReport report)
      : Error(code, "systems", message), report_(std::move(report)) {}
  const AssumptionReport& report() const { return report_; }

 private:
  AssumptionReport report_;
};

AssumptionReport audit_assumptions(const SystemDef& sys, const AuditOptions& opts = {});

// Spectral abscissa of a real square matrix.
double spectral_abscissa(const Eigen::MatrixXd& a);
// Irreducibility of the off-diagonal sign pattern (strong connectivity).
bool is_irreducible(const Eigen::MatrixXd& a, double tol = 0.0);

}  // namespace obsfront
