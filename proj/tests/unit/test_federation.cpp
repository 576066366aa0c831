#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "fedgan/common/error.hpp"
#include "fedgan/common/rng.hpp"
#include "fedgan/federation/report.hpp"
#include "fedgan/federation/training.hpp"
#include "fedgan/models/losses.hpp"
#include "fedgan/nn/gradcheck.hpp"

using namespace fedgan;
using namespace fedgan::federation;
using models::ArchitectureConfig;

namespace {

Tensor randn(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(s));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

ArchitectureConfig tiny_arch() {
  ArchitectureConfig a;
  a.window = 3;
  a.features = 2;
  a.latent_dim = 2;
  a.hidden = 3;
  a.critic_hidden = 4;
  return a;
}

TrainingConfig tiny_cfg(Mode mode, std::size_t iterations) {
  TrainingConfig c;
  c.mode = mode;
  c.iterations = iterations;
  c.critic_iterations = 2;
  c.local_iterations = 2;
  c.batch_size = 4;
  c.adam.alpha = 1e-3;
  c.seed = 11;
  return c;
}

TrainingData tiny_data(const TopologySpec& topo, const ArchitectureConfig& a,
                         std::uint64_t seed, std::size_t windows = 10) {
  Rng rng(seed);
  TrainingData d;
  d.shards.resize(topo.slices);
  for (auto& slice : d.shards) {
    for (std::size_t n = 0; n < topo.monitors_per_slice; ++n) {
      slice.push_back(randn({windows + n, a.window, a.features}, rng, 0.5));
    }
  }
  return d;
}

double max_trace_diff(const std::vector<LossTrace>& a, const std::vector<LossTrace>& b) {
  EXPECT_EQ(a.size(), b.size());
  double diff = 0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    diff = std::max({diff, std::abs(a[i].d_loss - b[i].d_loss),
                     std::abs(a[i].eg_loss - b[i].eg_loss)});
  }
  return diff;
}

// Zero-initialized 1-layer linear critic over [1 x 1] windows plus a 1-d latent.
models::CriticModel zero_linear_critic() {
  nn::NetworkSpec spec{2, 0, false, false, {nn::DenseSpec{1, nn::Activation::linear}}};
  return models::CriticModel(nn::Network(spec, nn::make_layer_params(spec)));
}

}  // namespace

// --- wire format -----------------------------------------------------------

TEST(Wire, HeaderLayoutIsLittleEndian) {
  Header h{MessageType::feedback_packet, 0x0102, 0x03040506, 0x0708090a0b0c0d0eull};
  const std::vector<double> payload{1.0};
  auto bytes = encode_message(h, payload);
  ASSERT_EQ(bytes.size(), 24u);
  const std::vector<std::uint8_t> head(bytes.begin(), bytes.begin() + 16);
  EXPECT_EQ(head, (std::vector<std::uint8_t>{1, 3, 0x02, 0x01, 0x06, 0x05, 0x04, 0x03, 0x0e, 0x0d,
                                             0x0c, 0x0b, 0x0a, 0x09, 0x08, 0x07}));
  // 1.0 is 0x3ff0000000000000
  EXPECT_EQ(bytes[23], 0x3f);
  EXPECT_EQ(bytes[22], 0xf0);
  EXPECT_EQ(decode_header(bytes), h);
  EXPECT_EQ(decode_payload(bytes, 1), payload);
}

TEST(Wire, RejectsBadVersionTypeAndLength) {
  auto bytes = encode_message({MessageType::gen_packet, 0, 0, 0}, std::vector<double>{1, 2});
  EXPECT_THROW(decode_payload(bytes, 3), FormatError);
  auto v = bytes;
  v[0] = 2;
  EXPECT_THROW(decode_header(v), FormatError);
  v = bytes;
  v[1] = 99;
  EXPECT_THROW(decode_header(v), FormatError);
  EXPECT_EQ(message_bytes(5), 56u);
}

TEST(Wire, PacketsRoundTrip) {
  Rng rng(3);
  GenPacket p;
  p.f = randn({3, 2}, rng);
  p.z = randn({3, 2}, rng);
  p.x_bar = randn({3, 4, 5}, rng);
  const auto back = GenPacket::from_payload(p.payload(), 3, 4, 5, 2);
  EXPECT_EQ(back.f.values(), p.f.values());
  EXPECT_EQ(back.z.values(), p.z.values());
  EXPECT_EQ(back.x_bar.values(), p.x_bar.values());

  FeedbackPacket fb;
  fb.e = models::JointBatch(randn({3, 4, 5}, rng), randn({3, 2}, rng), models::Provenance::real);
  fb.g = models::JointBatch(randn({3, 4, 5}, rng), randn({3, 2}, rng), models::Provenance::fake);
  const auto payload = fb.payload();
  EXPECT_EQ(payload.size(), 2u * 3 * (20 + 2));
  const auto fb2 = FeedbackPacket::from_payload(payload, 3, 4, 5, 2);
  EXPECT_EQ(fb2.e.data.values(), fb.e.data.values());
  EXPECT_EQ(fb2.g.latent.values(), fb.g.latent.values());
  EXPECT_THROW(FeedbackPacket::from_payload(std::span(payload).subspan(1), 3, 4, 5, 2),
               FormatError);
}

TEST(Wire, GenPacketBatchMismatch) {
  GenPacket p;
  p.f = Tensor({3, 2});
  p.z = Tensor({2, 2});
  p.x_bar = Tensor({3, 1, 1});
  EXPECT_THROW(p.validate(), DimensionError);
}

TEST(Bus, MissingMessageIsProtocolError) {
  CostLedger ledger;
  MessageBus bus(ledger);
  bus.send(Link::monitor_manager, Direction::up, {MessageType::batch_upload, 0, 1, 0},
           std::vector<double>{1, 2, 3});
  EXPECT_THROW(bus.receive({MessageType::batch_upload, 0, 2, 0}), ProtocolError);
  EXPECT_EQ(bus.receive({MessageType::batch_upload, 0, 1, 0}).size(), 40u);
  EXPECT_EQ(ledger.total_bytes(Link::monitor_manager), 40u);
  EXPECT_EQ(ledger.total_payload_bytes(Link::monitor_manager), 24u);
  EXPECT_EQ(bus.pending(), 0u);
}

// --- monitor ---------------------------------------------------------------

TEST(MonitorRound, SingleStepMatchesHandAdamOnLinearCritic) {
  TrainingConfig cfg;
  cfg.critic_iterations = 1;
  cfg.penalty = 10;
  const std::vector<double> xr{0.5, -1.0, 2.0}, fr{0.3, 0.1, -0.7};
  const std::vector<double> xf{1.5, 0.25, -0.5}, zf{-0.2, 0.9, 0.4};
  MonitorState state(0, 0, zero_linear_critic(), Tensor({3, 1, 1}, xr));
  GenPacket p;
  p.f = Tensor({3, 1}, fr);
  p.z = Tensor({3, 1}, zf);
  p.x_bar = Tensor({3, 1, 1}, xf);
  monitor_round(state, Tensor({3, 1, 1}, xr), p, cfg);

  // At w = 0 the critic gradient is constant, so the penalty has zero
  // (sub)gradient and only -(D(real) - D(fake)) contributes.
  double g_data = 0, g_lat = 0;
  for (int m = 0; m < 3; ++m) {
    g_data -= (xr[m] - xf[m]) / 3.0;
    g_lat -= (fr[m] - zf[m]) / 3.0;
  }
  auto adam_one = [&](double g) {
    const double m1 = (1 - cfg.adam.beta1) * g, v1 = (1 - cfg.adam.beta2) * g * g;
    const double mh = m1 / (1 - cfg.adam.beta1), vh = v1 / (1 - cfg.adam.beta2);
    return -cfg.adam.alpha * mh / (std::sqrt(vh) + cfg.adam.epsilon);
  };
  const auto& params = state.critic.network().params();
  EXPECT_NEAR(params[0][0], adam_one(g_data), 1e-15);
  EXPECT_NEAR(params[0][1], adam_one(g_lat), 1e-15);
  // The bias gradient cancels only up to rounding; Adam's normalization
  // magnifies that residue to about 1e-12.
  EXPECT_NEAR(params[1][0], 0.0, 1e-10);
}

TEST(MonitorRound, CoincidentPairsGiveOpposedFeedbacks) {
  const auto a = tiny_arch();
  TrainingConfig cfg;
  cfg.critic_iterations = 1;
  Rng rng(4);
  Tensor X = randn({5, a.window, a.features}, rng);
  Tensor z = randn({5, a.latent_dim}, rng);
  MonitorState state(0, 0, models::CriticModel(a, 9), X);
  GenPacket p{0, 0, z, z, X};
  auto r = monitor_round(state, X, p, cfg);
  for (std::size_t i = 0; i < r.feedback.e.data.size(); ++i) {
    EXPECT_EQ(r.feedback.e.data[i], -r.feedback.g.data[i]);
  }
  for (std::size_t i = 0; i < r.feedback.e.latent.size(); ++i) {
    EXPECT_EQ(r.feedback.e.latent[i], -r.feedback.g.latent[i]);
  }
  EXPECT_EQ(r.eg_loss, 0.0);
}

TEST(MonitorRound, IdenticalMonitorsAgreeAndMismatchThrows) {
  const auto a = tiny_arch();
  TrainingConfig cfg;
  cfg.critic_iterations = 3;
  Rng rng(8);
  Tensor X = randn({4, a.window, a.features}, rng);
  GenPacket p{2, 0, randn({4, 2}, rng), randn({4, 2}, rng), randn({4, 3, 2}, rng)};
  MonitorState m1(0, 0, models::CriticModel(a, 9), X), m2(0, 0, models::CriticModel(a, 9), X);
  auto r1 = monitor_round(m1, X, p, cfg);
  auto r2 = monitor_round(m2, X, p, cfg);
  EXPECT_EQ(r1.feedback.payload(), r2.feedback.payload());
  EXPECT_EQ(m1.critic.network().params(), m2.critic.network().params());
  EXPECT_EQ(r1.d_loss, r2.d_loss);
  EXPECT_THROW(monitor_round(m1, X.slice_rows(0, 3), p, cfg), DimensionError);
}

TEST(MonitorRound, FeedbacksUseCriticBeforeFinalUpdate) {
  const auto a = tiny_arch();
  TrainingConfig cfg;
  cfg.critic_iterations = 2;
  Rng rng(12);
  Tensor X = randn({4, a.window, a.features}, rng);
  GenPacket p{0, 0, randn({4, 2}, rng), randn({4, 2}, rng), randn({4, 3, 2}, rng)};
  MonitorState m(0, 0, models::CriticModel(a, 9), X);
  // Replay the first pass by hand, then take the feedback oracle.
  models::CriticModel D(a, 9);
  nn::AdamState st = nn::AdamState::for_params(D.network().params());
  models::JointBatch real(X, p.f, models::Provenance::real), fake(p.x_bar, p.z,
                                                                   models::Provenance::fake);
  auto eps = critic_epsilons(cfg.seed, 0, 0, 0, 1, 4);
  auto res = models::critic_loss(D, real, fake, eps, cfg.penalty);
  nn::adam_step(D.network().mutable_params(), res.param_grads, st, cfg.adam);
  auto expected = models::error_feedbacks(D, real, fake);
  auto r = monitor_round(m, X, p, cfg);
  EXPECT_EQ(r.feedback.g.data.values(), expected.g.data.values());
  EXPECT_EQ(r.eg_loss, expected.eg_loss);
}

// --- manager ---------------------------------------------------------------

TEST(Manager, SingleMonitorPacketShapesAndDeterminism) {
  const auto a = tiny_arch();
  TrainingConfig cfg;
  Rng rng(1);
  std::map<std::size_t, Tensor> b{{0, randn({5, 3, 2}, rng)}};
  ManagerState s1(0, 1, models::GeneratorModel(a, 1), models::EncoderModel(a, 2));
  ManagerState s2(0, 1, models::GeneratorModel(a, 1), models::EncoderModel(a, 2));
  auto p1 = manager_generate(s1, b, cfg, 7);
  auto p2 = manager_generate(s2, b, cfg, 7);
  ASSERT_EQ(p1.size(), 1u);
  EXPECT_EQ(p1[0].f.shape(), (Shape{5, 2}));
  EXPECT_EQ(p1[0].z.shape(), (Shape{5, 2}));
  EXPECT_EQ(p1[0].x_bar.shape(), (Shape{5, 3, 2}));
  EXPECT_EQ(p1[0].iteration, 7u);
  EXPECT_EQ(p1[0].payload(), p2[0].payload());
}

TEST(Manager, MissingBatchNamesMonitor) {
  const auto a = tiny_arch();
  TrainingConfig cfg;
  Rng rng(1);
  ManagerState s(0, 3, models::GeneratorModel(a, 1), models::EncoderModel(a, 2));
  std::map<std::size_t, Tensor> b{{0, randn({2, 3, 2}, rng)}, {2, randn({2, 3, 2}, rng)}};
  try {
    manager_generate(s, b, cfg, 0);
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("monitor 1"), std::string::npos);
  }
}

TEST(Manager, NoiseStreamsDoNotCollide) {
  auto a = tiny_arch();
  a.latent_dim = 16;
  TrainingConfig cfg;
  const std::size_t M = 625;  // 10^4 draws per monitor
  Rng rng(2);
  std::map<std::size_t, Tensor> b;
  for (std::size_t n = 0; n < 4; ++n) b[n] = randn({M, 3, 2}, rng);
  ManagerState s(0, 4, models::GeneratorModel(a, 1), models::EncoderModel(a, 2));
  auto packets = manager_generate(s, b, cfg, 0);
  std::set<double> seen;
  std::size_t draws = 0;
  for (const auto& p : packets) {
    for (double v : p.z.data()) {
      seen.insert(v);
      ++draws;
    }
  }
  EXPECT_EQ(draws, 4u * 10000u);
  EXPECT_EQ(seen.size(), draws);
  // A different slice or iteration yields yet another stream.
  ManagerState s2(1, 4, models::GeneratorModel(a, 1), models::EncoderModel(a, 2));
  auto other = manager_generate(s2, b, cfg, 0);
  for (double v : other[0].z.data()) EXPECT_FALSE(seen.count(v));
}

namespace {

struct ManagerFixture {
  ArchitectureConfig a = tiny_arch();
  TrainingConfig cfg;
  Rng rng{21};
  ManagerState make(std::size_t N) {
    return ManagerState(0, N, models::GeneratorModel(a, 3), models::EncoderModel(a, 4));
  }
  FeedbackPacket random_feedback(std::size_t n, std::size_t M, std::uint64_t it, bool zero) {
    FeedbackPacket p;
    p.iteration = it;
    p.monitor = static_cast<std::uint32_t>(n);
    const double sc = zero ? 0.0 : 1.0;
    p.e = models::JointBatch(randn({M, 3, 2}, rng, sc), randn({M, 2}, rng, sc),
                             models::Provenance::real);
    p.g = models::JointBatch(randn({M, 3, 2}, rng, sc), randn({M, 2}, rng, sc),
                             models::Provenance::fake);
    return p;
  }
};

}  // namespace

TEST(Manager, ZeroFeedbacksLeaveParametersUnchanged) {
  ManagerFixture fx;
  auto s = fx.make(2);
  std::map<std::size_t, Tensor> b{{0, randn({3, 3, 2}, fx.rng)}, {1, randn({3, 3, 2}, fx.rng)}};
  manager_generate(s, b, fx.cfg, 0);
  const auto g0 = s.generator.network().params();
  const auto e0 = s.encoder.network().params();
  manager_update(s, {fx.random_feedback(0, 3, 0, true), fx.random_feedback(1, 3, 0, true)},
                 fx.cfg);
  EXPECT_EQ(s.generator.network().params(), g0);
  EXPECT_EQ(s.encoder.network().params(), e0);
}

TEST(Manager, SecondMonitorSilentHalvesGradient) {
  ManagerFixture fx;
  Tensor X = randn({3, 3, 2}, fx.rng);
  auto one = fx.make(1);
  auto two = fx.make(2);
  manager_generate(one, {{0, X}}, fx.cfg, 0);
  manager_generate(two, {{0, X}, {1, X}}, fx.cfg, 0);
  auto fb = fx.random_feedback(0, 3, 0, false);
  auto g1 = assemble_gradients(one, {fb});
  auto g2 = assemble_gradients(two, {fb, fx.random_feedback(1, 3, 0, true)});
  auto half = g1.generator;
  half.scale(0.5);
  EXPECT_EQ(g2.generator, half);
  half = g1.encoder;
  half.scale(0.5);
  EXPECT_EQ(g2.encoder, half);
}

TEST(Manager, ProtocolViolations) {
  ManagerFixture fx;
  auto s = fx.make(2);
  EXPECT_THROW(assemble_gradients(s, {}), ProtocolError);  // nothing pending
  manager_generate(s, {{0, randn({3, 3, 2}, fx.rng)}, {1, randn({3, 3, 2}, fx.rng)}}, fx.cfg, 4);
  auto a0 = fx.random_feedback(0, 3, 4, false);
  auto a1 = fx.random_feedback(1, 3, 4, false);
  auto stale = fx.random_feedback(1, 3, 3, false);
  EXPECT_THROW(assemble_gradients(s, {a0}), ProtocolError);
  EXPECT_THROW(assemble_gradients(s, {a0, a0}), ProtocolError);
  EXPECT_THROW(assemble_gradients(s, {a0, stale}), ProtocolError);
  EXPECT_NO_THROW(assemble_gradients(s, {a1, a0}));
}

TEST(Manager, FeedbackGradientMatchesFiniteDifferencesOfMeanLocalLoss) {
  const auto a = tiny_arch();
  TrainingConfig cfg;
  Rng rng(31);
  const std::size_t N = 2, M = 3;
  std::vector<models::CriticModel> critics{models::CriticModel(a, 5), models::CriticModel(a, 6)};
  std::map<std::size_t, Tensor> b{{0, randn({M, 3, 2}, rng)}, {1, randn({M, 3, 2}, rng)}};
  ManagerState s(0, N, models::GeneratorModel(a, 3), models::EncoderModel(a, 4));
  auto packets = manager_generate(s, b, cfg, 0);
  std::vector<FeedbackPacket> fbs;
  for (std::size_t n = 0; n < N; ++n) {
    models::JointBatch real(b[n], packets[n].f, models::Provenance::real);
    models::JointBatch fake(packets[n].x_bar, packets[n].z, models::Provenance::fake);
    auto f = models::error_feedbacks(critics[n], real, fake);
    fbs.push_back({0, static_cast<std::uint32_t>(n), f.e, f.g});
  }
  auto grads = assemble_gradients(s, fbs);

  auto mean_loss = [&](const models::GeneratorModel& G, const models::EncoderModel& E) {
    double total = 0;
    for (std::size_t n = 0; n < N; ++n) {
      models::JointBatch real(b[n], E.encode(b[n]), models::Provenance::real);
      models::JointBatch fake(G.generate(packets[n].z), packets[n].z, models::Provenance::fake);
      total += models::eg_local_loss(critics[n], real, fake);
    }
    return total / N;
  };
  auto fd_g = nn::finite_difference_gradient(
      [&](const nn::ParamSet& p) {
        return mean_loss(models::GeneratorModel(nn::Network(s.generator.network().spec(), p)),
                         s.encoder);
      },
      s.generator.network().params(), 1e-5);
  auto fd_e = nn::finite_difference_gradient(
      [&](const nn::ParamSet& p) {
        return mean_loss(s.generator,
                         models::EncoderModel(nn::Network(s.encoder.network().spec(), p)));
      },
      s.encoder.network().params(), 1e-5);
  EXPECT_LT(nn::max_relative_error(grads.generator, fd_g), 1e-4);
  EXPECT_LT(nn::max_relative_error(grads.encoder, fd_e), 1e-4);
}

// --- controller ------------------------------------------------------------

TEST(Controller, EqualWeightsAverage) {
  nn::ParamSet p1, p2;
  p1.add("w", Tensor::vector({0.2}));
  p2.add("w", Tensor::vector({0.4}));
  auto out = controller_aggregate({p1, p2}, SliceWeights{{5, 5}});
  EXPECT_DOUBLE_EQ(out[0][0], 0.3);
  EXPECT_EQ(out[0][0], (0.2 + 0.4) / 2);
}

TEST(Controller, SingleSliceIsIdentity) {
  Rng rng(2);
  nn::ParamSet p;
  p.add("w", randn({3, 4}, rng));
  EXPECT_EQ(controller_aggregate({p}, SliceWeights{{17}}), p);
}

TEST(Controller, MatchesBruteForceWeightedMean) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t S = 1 + rng.index(5);
    std::vector<nn::ParamSet> ps(S);
    SliceWeights w;
    for (auto& p : ps) {
      Rng shape_rng(99);
      p.add("a", randn({2, 3}, rng));
      p.add("b", randn({4}, rng));
      w.q.push_back(static_cast<double>(rng.index(100)));
    }
    w.q[0] += 1;  // Q > 0
    auto out = controller_aggregate(ps, w);
    double q = 0;
    for (double v : w.q) q += v;
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t i = 0; i < out[t].size(); ++i) {
        double acc = 0;
        long double exact = 0;
        for (std::size_t s = 0; s < S; ++s) {
          acc += (w.q[s] / q) * ps[s][t][i];
          exact += static_cast<long double>(w.q[s]) * ps[s][t][i];
        }
        EXPECT_EQ(out[t][i], acc);
        EXPECT_NEAR(out[t][i], static_cast<double>(exact / q), 1e-14);
      }
    }
  }
}

TEST(Controller, RejectsMismatchAndBadWeights) {
  nn::ParamSet p1, p2;
  p1.add("w", Tensor::vector({1, 2}));
  p2.add("w", Tensor::vector({1}));
  EXPECT_THROW(controller_aggregate({p1, p2}, SliceWeights{{1, 1}}), DimensionError);
  EXPECT_THROW(controller_aggregate({p1, p1}, SliceWeights{{0, 0}}), UsageError);
  EXPECT_THROW(controller_aggregate({p1, p1}, SliceWeights{{1}}), UsageError);
}

TEST(Controller, ApplyGlobalReplacesParamsKeepsMoments) {
  ManagerFixture fx;
  auto s = fx.make(1);
  manager_generate(s, {{0, randn({3, 3, 2}, fx.rng)}}, fx.cfg, 0);
  manager_update(s, {fx.random_feedback(0, 3, 0, false)}, fx.cfg);
  const auto moments = s.adam_g.first_moment;
  auto target = fx.make(1);
  apply_global(s, target.generator.network().params(), target.encoder.network().params());
  EXPECT_EQ(s.generator.network().params(), target.generator.network().params());
  EXPECT_EQ(s.encoder.network().params(), target.encoder.network().params());
  EXPECT_EQ(s.adam_g.first_moment, moments);
  EXPECT_EQ(s.adam_g.step_count, 1u);
  nn::ParamSet wrong;
  wrong.add("x", Tensor::vector({1}));
  EXPECT_THROW(apply_global(s, wrong, target.encoder.network().params()), DimensionError);
}

// --- training modes --------------------------------------------------------

TEST(Training, FederatedSingleNodeEqualsStandalone) {
  const auto a = tiny_arch();
  TopologySpec topo{1, 1, false};
  auto data = tiny_data(topo, a, 4);
  for (std::size_t L : {1, 3}) {
    auto fed = tiny_cfg(Mode::federated, 12);
    fed.local_iterations = L;
    auto alone = tiny_cfg(Mode::standalone, 12);
    auto rf = run_training(topo, fed, a, data);
    auto rs = run_training(topo, alone, a, data);
    EXPECT_LE(max_trace_diff(rf.traces, rs.traces), 1e-10);
    const auto& mf = rf.monitors[0][0];
    const auto& ms = rs.monitors[0][0];
    EXPECT_LE(nn::max_abs_diff(mf.generator.network().params(), ms.generator.network().params()),
              1e-10);
    EXPECT_LE(nn::max_abs_diff(mf.encoder->network().params(), ms.encoder->network().params()),
              1e-10);
    EXPECT_LE(nn::max_abs_diff(mf.critic.network().params(), ms.critic.network().params()),
              1e-10);
  }
}

TEST(Training, FederatedOneSliceUnitPeriodEqualsDistributed) {
  const auto a = tiny_arch();
  TopologySpec topo{1, 3, false};
  auto data = tiny_data(topo, a, 5);
  auto fed = tiny_cfg(Mode::federated, 8);
  fed.local_iterations = 1;
  auto dist = tiny_cfg(Mode::distributed, 8);
  auto rf = run_training(topo, fed, a, data);
  auto rd = run_training(topo, dist, a, data);
  EXPECT_LE(max_trace_diff(rf.traces, rd.traces), 1e-10);
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_LE(nn::max_abs_diff(rf.monitors[0][n].critic.network().params(),
                               rd.monitors[0][n].critic.network().params()),
              1e-10);
  }
}

TEST(Controller, IdenticalSlicesAggregateToThemselves) {
  Rng rng(3);
  nn::ParamSet p;
  p.add("w", randn({5, 5}, rng));
  for (std::size_t S : {2, 4}) {
    std::vector<nn::ParamSet> ps(S, p);
    SliceWeights w;
    w.q.assign(S, 7.0);
    EXPECT_EQ(controller_aggregate(ps, w), p);
  }
  // Unequal weights or a non-power-of-two count round at the last ulp at most.
  std::vector<nn::ParamSet> ps(3, p);
  EXPECT_LE(nn::max_abs_diff(controller_aggregate(ps, SliceWeights{{1, 5, 11}}), p), 1e-15);
}

TEST(Training, SlicesHoldGlobalModelAfterFinalAggregation) {
  const auto a = tiny_arch();
  TopologySpec two{2, 2, false};
  auto data = tiny_data(two, a, 6);
  auto cfg = tiny_cfg(Mode::federated, 4);
  auto r = run_training(two, cfg, a, data);
  ASSERT_TRUE(r.global);
  EXPECT_EQ(r.monitors[0][0].generator.network().params(), r.global->generator);
  EXPECT_EQ(r.monitors[1][1].encoder->network().params(), r.global->encoder);
}

TEST(Training, ZeroIterationsReturnUntrainedModels) {
  const auto a = tiny_arch();
  TopologySpec topo{2, 2, false};
  auto data = tiny_data(topo, a, 7);
  for (Mode m : {Mode::centralized, Mode::standalone, Mode::distributed, Mode::federated}) {
    auto cfg = tiny_cfg(m, 0);
    auto r = run_training(topo, cfg, a, data);
    EXPECT_TRUE(r.traces.empty());
    EXPECT_TRUE(r.ledger.empty());
    EXPECT_TRUE(r.ledger.flops.empty());
    EXPECT_EQ(r.monitors[1][1].generator.network().params(),
              initial_generator(a, cfg.seed).network().params());
    EXPECT_EQ(r.monitors[1][0].critic.network().params(),
              initial_critic(a, cfg.variant, cfg.seed, m == Mode::centralized ? 0 : 1,
                             0).network().params());
  }
}

TEST(Training, PrivacyFlagForbidsCentralized) {
  const auto a = tiny_arch();
  TopologySpec topo{1, 2, true};
  auto data = tiny_data(topo, a, 7);
  EXPECT_THROW(run_training(topo, tiny_cfg(Mode::centralized, 1), a, data), ConfigError);
  EXPECT_NO_THROW(run_training(topo, tiny_cfg(Mode::federated, 1), a, data));
}

TEST(Training, RejectsShardsThatDoNotCoverTopology) {
  const auto a = tiny_arch();
  TopologySpec topo{2, 2, false};
  auto data = tiny_data(TopologySpec{2, 1, false}, a, 7);
  EXPECT_THROW(run_training(topo, tiny_cfg(Mode::federated, 1), a, data), ConfigError);
}

TEST(Training, ThreadCountDoesNotChangeResults) {
  const auto a = tiny_arch();
  TopologySpec topo{2, 2, false};
  auto data = tiny_data(topo, a, 8);
  auto c1 = tiny_cfg(Mode::federated, 6);
  auto c3 = c1;
  c3.threads = 3;
  auto r1 = run_training(topo, c1, a, data);
  auto r3 = run_training(topo, c3, a, data);
  EXPECT_EQ(max_trace_diff(r1.traces, r3.traces), 0.0);
  EXPECT_EQ(r1.global->generator, r3.global->generator);
  EXPECT_EQ(r1.monitors[1][1].critic.network().params(),
            r3.monitors[1][1].critic.network().params());
  std::ostringstream l1, l3;
  write_ledger_csv(l1, r1.ledger);
  write_ledger_csv(l3, r3.ledger);
  EXPECT_EQ(l1.str(), l3.str());
}

TEST(Training, ProtocolConservationAndByteAccounting) {
  const auto a = tiny_arch();
  const std::size_t S = 2, N = 3, I = 7, L = 3, M = 4;
  TopologySpec topo{S, N, false};
  auto data = tiny_data(topo, a, 9);
  auto cfg = tiny_cfg(Mode::federated, I);
  cfg.local_iterations = L;
  auto r = run_training(topo, cfg, a, data);
  const auto& led = r.ledger;
  EXPECT_EQ(led.message_count(MessageType::gen_packet), I * S * N);
  EXPECT_EQ(led.message_count(MessageType::feedback_packet), I * S * N);
  EXPECT_EQ(led.message_count(MessageType::batch_upload), I * S * N);
  EXPECT_EQ(led.message_count(MessageType::param_upload), (I / L) * S);
  EXPECT_EQ(led.message_count(MessageType::global_broadcast), (I / L) * S);
  EXPECT_EQ(led.message_count(MessageType::initial_model), S);

  const std::size_t td = a.window * a.features, k = a.latent_dim;
  const std::size_t params = r.sizes.theta_g + r.sizes.theta_e;
  const std::uint64_t mm = I * S * N *
                           (message_bytes(M * td) + message_bytes(2 * M * k + M * td) +
                            message_bytes(2 * M * (td + k)));
  EXPECT_EQ(led.total_bytes(Link::monitor_manager), mm);
  EXPECT_EQ(led.total_bytes(Link::manager_controller),
            (2 * (I / L) * S + S) * message_bytes(params));
  // Per iteration and slice: N packets each way on the monitor link.
  for (const auto& [key, round] : led.rounds()) {
    const auto [link, dir, it] = key;
    if (link == Link::monitor_manager) {
      EXPECT_EQ(round.messages, (dir == Direction::up ? 2 : 1) * S * N);
    }
  }
}

TEST(Training, CostsScaleWithBatchAndPeriod) {
  const auto a = tiny_arch();
  TopologySpec topo{2, 1, false};
  auto data = tiny_data(topo, a, 10);
  auto c = tiny_cfg(Mode::federated, 8);
  c.local_iterations = 2;
  auto r1 = run_training(topo, c, a, data);
  auto c2 = c;
  c2.batch_size *= 2;
  auto r2 = run_training(topo, c2, a, data);
  EXPECT_EQ(r2.ledger.total_payload_bytes(Link::monitor_manager),
            2 * r1.ledger.total_payload_bytes(Link::monitor_manager));
  auto c3 = c;
  c3.local_iterations = 4;
  auto r3 = run_training(topo, c3, a, data);
  EXPECT_EQ(2 * r3.ledger.message_count(MessageType::param_upload),
            r1.ledger.message_count(MessageType::param_upload));
}

TEST(Training, FlopsMatchClosedFormsInEveryMode) {
  const auto a = tiny_arch();
  TopologySpec topo{2, 2, false};
  auto data = tiny_data(topo, a, 11);
  for (Mode m : {Mode::centralized, Mode::standalone, Mode::distributed, Mode::federated}) {
    auto cfg = tiny_cfg(m, 5);
    cfg.local_iterations = 2;
    auto r = run_training(topo, cfg, a, data);
    auto rep = ledger_report(r, topo, cfg, 10);
    ASSERT_FALSE(rep.flops.empty());
    for (const auto& f : rep.flops) {
      EXPECT_EQ(f.measured, f.closed_form) << to_string(m) << " " << f.node;
    }
    const FlopFormulas ff = flop_formulas(topo, cfg, r.sizes);
    const double D = r.sizes.theta_d, EG = r.sizes.theta_e + r.sizes.theta_g;
    EXPECT_EQ(ff.monitor, 4.0 * 5 * 3 * 4 * D);
    EXPECT_EQ(ff.manager, 2.0 * 5 * 4 * 2 * EG);
    EXPECT_EQ(ff.controller, 2.0 * EG * 2);
  }
}

TEST(Training, DistributedSingleMonitorEqualsStandalone) {
  const auto a = tiny_arch();
  TopologySpec topo{1, 1, false};
  auto data = tiny_data(topo, a, 12);
  auto rd = run_training(topo, tiny_cfg(Mode::distributed, 6), a, data);
  auto rs = run_training(topo, tiny_cfg(Mode::standalone, 6), a, data);
  EXPECT_LE(max_trace_diff(rd.traces, rs.traces), 1e-10);
}

TEST(Training, CentralizedChargesDataUpload) {
  const auto a = tiny_arch();
  TopologySpec topo{2, 2, false};
  auto data = tiny_data(topo, a, 13);
  auto r = run_training(topo, tiny_cfg(Mode::centralized, 2), a, data);
  std::uint64_t expected = 0;
  for (const auto& s : data.shards) {
    for (const auto& t : s) expected += message_bytes(t.size());
  }
  EXPECT_EQ(r.ledger.total_bytes(Link::monitor_controller), expected);
  EXPECT_EQ(r.traces.size(), 2u);
}

TEST(Training, WarmStartUsesGlobalModel) {
  const auto a = tiny_arch();
  TopologySpec topo{1, 1, false};
  auto data = tiny_data(topo, a, 14);
  auto first = run_training(topo, tiny_cfg(Mode::federated, 4), a, data);
  RunOptions opts;
  opts.warm_start = first.global;
  auto joined = run_training(topo, tiny_cfg(Mode::federated, 0), a, data, opts);
  EXPECT_EQ(joined.monitors[0][0].generator.network().params(), first.global->generator);
  EXPECT_EQ(joined.monitors[0][0].encoder->network().params(), first.global->encoder);
}

TEST(Training, BaselineVariantsTrainStandalone) {
  const auto a = tiny_arch();
  TopologySpec topo{1, 1, false};
  auto data = tiny_data(topo, a, 15);
  for (auto v : {models::Variant::gan, models::Variant::bigan, models::Variant::wgan,
                 models::Variant::wgan_gp, models::Variant::biwgan_gp}) {
    auto cfg = tiny_cfg(Mode::standalone, 3);
    cfg.variant = v;
    auto r = run_training(topo, cfg, a, data);
    EXPECT_EQ(r.traces.size(), 3u);
    EXPECT_EQ(r.monitors[0][0].encoder.has_value(), models::has_encoder(v));
    if (v == models::Variant::wgan) {
      for (const auto& e : r.monitors[0][0].critic.network().params()) {
        for (double x : e.value.data()) EXPECT_LE(std::abs(x), cfg.clip);
      }
    }
    EXPECT_NE(r.monitors[0][0].generator.network().params(),
              initial_generator(a, cfg.seed).network().params());
  }
  auto bad = tiny_cfg(Mode::federated, 3);
  bad.variant = models::Variant::wgan;
  EXPECT_THROW(run_training(topo, bad, a, data), ConfigError);
}

TEST(Training, TraceCsvAndReport) {
  const auto a = tiny_arch();
  TopologySpec topo{2, 1, false};
  auto data = tiny_data(topo, a, 16);
  auto cfg = tiny_cfg(Mode::federated, 3);
  auto r = run_training(topo, cfg, a, data);
  std::ostringstream os;
  write_traces_csv(os, r.traces);
  EXPECT_EQ(os.str().substr(0, 31), "iteration,group,d_loss,eg_loss\n");
  auto avg = average_over_groups(r.traces);
  ASSERT_EQ(avg.size(), 3u);
  EXPECT_DOUBLE_EQ(avg[0].d_loss, (r.traces[0].d_loss + r.traces[1].d_loss) / 2);
  std::ostringstream rep;
  write_report_text(rep, ledger_report(r, topo, cfg, 10));
  EXPECT_NE(rep.str().find("monitor_manager"), std::string::npos);
}
