#include <gtest/gtest.h>

#include "common.hpp"

using namespace neumannlab;
using testing_support::ref5_f;
using testing_support::ref5_space;

namespace {

CriticalPointRecord fake(double shift, int index, bool degenerate = false,
                         Classification cls = Classification::other) {
  CriticalPointRecord r;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(4);
  c[0] = shift;
  c[1] = 0.5;
  r.u = SpectralField(c);
  r.morse_index = index;
  r.degenerate = degenerate;
  r.classification = cls;
  r.h1_norm = c.norm();
  r.provenance = "fake" + std::to_string(shift);
  return r;
}

}  // namespace

TEST(Ledger, LocalDegrees) {
  EXPECT_EQ(local_degree(fake(0, 0), 2), 1);
  EXPECT_EQ(local_degree(fake(0, 1), 2), -1);
  EXPECT_EQ(local_degree(fake(0, 2), 2), 1);
  EXPECT_EQ(local_degree(fake(0, 1, false, Classification::mp_type), 2), -1);
  EXPECT_EQ(local_degree(fake(0, 1, true, Classification::reduction_max), 3), -1);
  EXPECT_THROW((void)local_degree(fake(0, 1, true), 2), Error);
}

TEST(Ledger, MergesDuplicatesAndFlagsDegenerates) {
  DegreeLedger l(2, 10.0, Eigen::VectorXd::Ones(4));
  EXPECT_TRUE(l.add(fake(1, 0)));
  EXPECT_FALSE(l.add(fake(1 + 1e-6, 0)));
  EXPECT_EQ(l.entries().front().aliases.size(), 1u);
  EXPECT_TRUE(l.add(fake(2, 2, true)));
  EXPECT_FALSE(l.entries().back().degree.has_value());
  EXPECT_FALSE(l.add(fake(2, 2, true, Classification::reduction_max)));
  EXPECT_EQ(l.entries().back().degree, 1);
}

TEST(Ledger, ReconcileExcludesOutsideBall) {
  DegreeLedger l(2, 3.0, Eigen::VectorXd::Ones(4));
  l.add(fake(1, 0));
  l.add(fake(2, 1));
  l.add(fake(5, 1));
  const LedgerReport r = reconcile(l);
  EXPECT_EQ(r.global_degree, 1);
  EXPECT_EQ(r.degree_sum, 0);
  EXPECT_EQ(r.deficiency, 1);
  EXPECT_EQ(r.counted, 2);
  EXPECT_FALSE(r.balanced);
  l.set_radius(10.0);
  l.refresh_ball();
  EXPECT_EQ(reconcile(l).degree_sum, -1);
}

TEST(Ledger, ReflectionSuggestions) {
  DegreeLedger l(2, 10.0, Eigen::VectorXd::Ones(4));
  l.add(fake(1, 0));
  l.add(fake(2, 0));
  Eigen::VectorXd s(4);
  s << 1, -1, 1, -1;
  const LedgerReport r = reconcile(l, {s});
  ASSERT_EQ(r.suggestions.size(), 2u);
  EXPECT_DOUBLE_EQ(r.suggestions[0].center[1], -0.5);
}

TEST(Ledger, QualitativeChecksAndTransfer) {
  const Nonlinearity f = ref5_f();
  const auto space = ref5_space(16);
  const Nonlinearity g = truncate(f, TruncationKind::below(-1));
  const EnergyFunctional jg(space, g);
  const EnergyFunctional jf(space, f);
  const CriticalPointRecord r =
      mountain_pass(jg, space->constant(-1).coeffs(), space->constant(-6).coeffs(), SolverConfig{}, "mp");
  CriticalPointRecord rr = r;
  rr.truncation = TruncationKind::below(-1);
  const CriticalPointRecord t = transfer_to_original(rr, jf, g);
  EXPECT_LT(t.residual, 1e-8);
  // Below the anchor g = f, so the energies differ by |Omega| (F - G)(-1).
  EXPECT_NEAR(jg.value(r.u.coeffs()) - t.energy, std::numbers::pi * (f.primitive(-1) - g.primitive(-1)), 1e-9);
  const QualitativeReport q = qualitative_classify(t, f);
  EXPECT_TRUE(q.pass);

  CriticalPointRecord bad = rr;
  bad.range_max = 0.5;
  try {
    (void)transfer_to_original(bad, jf, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RangeEscape);
  }
}
