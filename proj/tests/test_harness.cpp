#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fvfrac;

TEST(PHelper, Examples) {
  EXPECT_EQ(p_helper(0.0, 0.5), 0.0);
  // 2/G(1.5) - 12/G(2.5) + 24/G(3.5), evaluated independently and frozen.
  EXPECT_NEAR(p_helper(1.0, 1.5), 0.45135166683820493, 1e-14);
  EXPECT_THROW(p_helper(0.5, 1.0), Error);
  EXPECT_THROW(p_helper(-0.1, 0.5), Error);
}

TEST(PHelper, MatchesGrunwald) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  oracle::Fn1 f = [](double z) { return z <= 0.0 ? 0.0 : z * z * (1.0 - z) * (1.0 - z); };
  for (int i = 0; i < 20; ++i) {
    const double z = 0.05 + 0.9 * u(rng);
    double r = 0.05 + 1.9 * u(rng);
    if (std::abs(r - 1.0) < 0.02) r += 0.05;
    EXPECT_NEAR(p_helper(z, r), oracle::grunwald_richardson(f, r, z, 0.0, Side::Left, 1e-4), 1e-4)
        << "z=" << z << " r=" << r;
  }
}

TEST(RlMonomial, Examples) {
  EXPECT_NEAR(rl_monomial(0, 0.0, 1.5, 1.0, Side::Left), -0.5 / std::sqrt(std::numbers::pi), 1e-14);
  EXPECT_NEAR(rl_monomial(2, 0.0, 1.5, 1.0, Side::Left), 2.0 / std::tgamma(1.5), 1e-14);
  EXPECT_THROW(rl_monomial(2, 0.0, 1.5, 0.0, Side::Left), Error);
  EXPECT_THROW(rl_monomial(2, 0.0, 1.5, 0.5, Side::Right), Error);
  EXPECT_THROW(rl_monomial(5, 0.0, 1.5, 1.0, Side::Left), Error);
  EXPECT_THROW(rl_monomial(2, 0.0, 0.5, 1.0, Side::Left), Error);
}

TEST(RlMonomial, MatchesGrunwald) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> deg(0, 4);
  for (int i = 0; i < 40; ++i) {
    const int n = deg(rng);
    const double limit = 2.0 * u(rng) - 1.0, mu = 1.05 + 0.9 * u(rng);
    const Side side = i % 2 == 0 ? Side::Left : Side::Right;
    const double x = side == Side::Left ? limit + 0.2 + u(rng) : limit - 0.2 - u(rng);
    oracle::Fn1 f = [&](double z) {
      const bool inside = side == Side::Left ? z >= limit : z <= limit;
      return inside ? std::pow(z, n) : 0.0;
    };
    const double ref = oracle::grunwald_aligned(f, mu, x, limit, side, 20000);
    EXPECT_NEAR(rl_monomial(n, limit, mu, x, side), ref, 1e-4 * std::max(1.0, std::abs(ref)))
        << "n=" << n << " limit=" << limit << " mu=" << mu << " x=" << x;
  }
}

TEST(Presets, ExactValuesAndBoundary) {
  const Preset a = build_preset("example1-linear");
  EXPECT_DOUBLE_EQ(a.exact(0.5, 0.5, 0.0), 0.00390625);
  EXPECT_EQ(a.spec.alpha, 0.3);
  EXPECT_EQ(a.spec.beta, 0.5);
  const Preset b = build_preset("example2-riesz-disk");
  EXPECT_DOUBLE_EQ(b.exact(0.0, 0.0, 0.0), 1.0);
  EXPECT_EQ(b.spec.alpha, 0.8);
  for (const auto& name : preset_names()) {
    const Preset p = build_preset(name);
    for (Index v = 0; v < p.mesh.num_vertices(); ++v)
      if (p.mesh.is_boundary(v)) EXPECT_NEAR(p.exact(p.mesh.vertex(v).x, p.mesh.vertex(v).y, 0.7), 0.0, 1e-15);
  }
  EXPECT_THROW(build_preset("example3"), Error);
  const Preset q = build_preset("example1-quadratic", {.alpha = 0.4, .beta = 0.6});
  EXPECT_EQ(q.spec.alpha, 0.4);
  EXPECT_EQ(q.spec.beta, 0.6);
}

TEST(Presets, RectCells) {
  EXPECT_EQ(rect_cells_for(0.3, 1.0), 5u);
  EXPECT_EQ(rect_cells_for(0.15, 1.0), 10u);
  EXPECT_EQ(rect_cells_for(0.075, 1.0), 19u);
  EXPECT_THROW(rect_cells_for(0.0, 1.0), Error);
}

TEST(Presets, ResidualAudit) {
  for (const auto& name : preset_names()) {
    SCOPED_TRACE(name);
    const Preset p = build_preset(name);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int i = 0; i < 20; ++i) {
      const Point2 q = oracle::random_interior_point(p.spec.domain, rng);
      EXPECT_LE(std::abs(oracle::pde_residual(p, q.x, q.y, u(rng), 1e-4)), 1e-4);
    }
  }
}

TEST(Norms, ExactAndConstant) {
  const Preset p = build_preset("example2-riesz-disk");
  const Discretization d(p.mesh);
  Vector u(d.num_unknowns());
  for (Index k = 0; k < u.size(); ++k) u[k] = p.exact(d.unknown_point(k).x, d.unknown_point(k).y, 0.5);
  const auto z = error_norms(d, u, p.exact, 0.5);
  EXPECT_EQ(z.l2, 0.0);
  EXPECT_EQ(z.linf, 0.0);
  for (auto& v : u) v += 0.25;
  double vol = 0.0;
  for (double a : assemble_mass(d)) vol += a;
  const auto c = error_norms(d, u, p.exact, 0.5);
  EXPECT_NEAR(c.linf, 0.25, 1e-15);
  EXPECT_NEAR(c.l2, 0.25 * std::sqrt(vol), 1e-14);
}

TEST(Orders, Examples) {
  EXPECT_NEAR(convergence_order(4e-4, 0.3, 1e-4, 0.15), 2.0, 1e-12);
  EXPECT_NEAR(convergence_order(3e-3, 0.2, 3e-3, 0.1), 0.0, 1e-15);
  EXPECT_NEAR(convergence_order(3.5684e-4, 3.1123e-1, 1.0880e-4, 1.6759e-1), 1.92, 5e-3);
  EXPECT_THROW(convergence_order(0.0, 0.3, 1e-4, 0.15), Error);
  EXPECT_THROW(convergence_order(1e-3, 0.3, 1e-4, 0.3), Error);
}

TEST(Convergence, TwoLevelStructure) {
  const auto rows = run_convergence("example1-linear", {0.3, 0.15}, {.tau = 1e-2, .t_final = 0.1});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].order_l2.has_value());
  EXPECT_FALSE(rows[0].order_linf.has_value());
  ASSERT_TRUE(rows[1].order_l2.has_value());
  ASSERT_TRUE(rows[1].order_linf.has_value());
  EXPECT_GT(rows[0].h, rows[1].h);
  EXPECT_LT(rows[1].linf_error, rows[0].linf_error);
  EXPECT_THROW(run_convergence("example1-linear", {0.3}), Error);
  EXPECT_THROW(run_convergence("example1-linear", {0.15, 0.3}), Error);
}

TEST(Convergence, CoarseRowNearReferenceScale) {
  // Coarse mesh, full protocol: within a factor 5 of the reference coarse-mesh errors
  // (L2 3.5684E-04, Linf 1.4774E-03).
  const auto rows = run_convergence("example1-linear", {0.3, 0.2}, {.tau = 1e-3, .t_final = 1.0});
  EXPECT_GT(rows[0].l2_error, 3.5684e-4 / 5.0);
  EXPECT_LT(rows[0].l2_error, 3.5684e-4 * 5.0);
  EXPECT_GT(rows[0].linf_error, 1.4774e-3 / 5.0);
  EXPECT_LT(rows[0].linf_error, 1.4774e-3 * 5.0);
}

TEST(Csv, LayoutAndStability) {
  const RunOptions opt{.tau = 1e-2, .t_final = 0.05};
  auto strip_time = [](std::string s) {
    std::string out;
    std::istringstream is(s);
    for (std::string line; std::getline(is, line);) out += line.substr(0, line.rfind(',')) + '\n';
    return out;
  };
  std::ostringstream a, b;
  write_convergence_csv(a, run_convergence("example1-linear", {0.3, 0.15}, opt));
  write_convergence_csv(b, run_convergence("example1-linear", {0.3, 0.15}, opt));
  EXPECT_EQ(strip_time(a.str()), strip_time(b.str()));
  std::istringstream is(a.str());
  std::string header, first, second;
  std::getline(is, header);
  std::getline(is, first);
  std::getline(is, second);
  EXPECT_EQ(header, "h,l2_error,order_l2,linf_error,order_linf,iters_avg,wall_seconds");
  EXPECT_EQ(std::count(first.begin(), first.end(), ','), 6);
  EXPECT_NE(first.find(",,"), std::string::npos);
  EXPECT_EQ(second.find(",,"), std::string::npos);
  EXPECT_EQ(format_sci(3.5684e-4), "3.5684E-04");
}

TEST(Vtk, CountsAndZeroField) {
  const Mesh m = generate_disk_mesh(0.5, fixtures::unit_disk());
  std::ostringstream os;
  emit_vtk(m, Vector(m.num_vertices(), 0.0), os);
  std::istringstream is(os.str());
  std::string line;
  std::size_t points = 0, cells = 0, types = 0, data = 0;
  bool in_scalars = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "POINTS") ls >> points;
    if (key == "CELLS") ls >> cells;
    if (key == "CELL_TYPES") ls >> types;
    if (key == "LOOKUP_TABLE") {
      in_scalars = true;
      continue;
    }
    if (in_scalars) {
      EXPECT_EQ(std::stod(line), 0.0);
      ++data;
    }
  }
  EXPECT_EQ(points, m.num_vertices());
  EXPECT_EQ(cells, m.num_triangles());
  EXPECT_EQ(types, m.num_triangles());
  EXPECT_EQ(data, m.num_vertices());
  EXPECT_THROW(emit_vtk(m, Vector(3, 0.0), os), Error);
}
