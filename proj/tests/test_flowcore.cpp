#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dohdet/flowcore.hpp"
#include "dohdet/rng.hpp"

#include <algorithm>
#include <stdexcept>

using namespace dohdet;

namespace {

PacketRecord packet(const std::string& key, double ts, Direction dir, std::uint32_t size) {
    PacketRecord p;
    p.conn_key = key;
    p.timestamp = ts;
    p.direction = dir;
    p.size_bytes = size;
    return p;
}

Flow make_flow(std::vector<PacketRecord> packets) {
    Flow flow;
    flow.conn_key = packets.front().conn_key;
    flow.packets = std::move(packets);
    return flow;
}

Flow random_flow(Rng& rng) {
    const int n = static_cast<int>(rng.uniform_int(1, 30));
    std::vector<PacketRecord> packets;
    double t = rng.uniform(0.0, 10.0);
    for (int i = 0; i < n; ++i) {
        packets.push_back(packet("k|1|s|443|tcp", t,
                                 rng.uniform() < 0.5 ? Direction::Outgoing : Direction::Incoming,
                                 static_cast<std::uint32_t>(rng.uniform_int(60, 1500))));
        t += rng.exponential(0.1);
    }
    return make_flow(std::move(packets));
}

} // namespace

TEST_CASE("single-packet flow: degenerate statistics") {
    Flow flow = make_flow({packet("a|1|b|443|tcp", 0.0, Direction::Outgoing, 120)});
    FeatureVector f = extract_features(flow);
    FeatureVector expected = {120, 120, 0, 120, 120, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    for (std::size_t i = 0; i < kFeatureCount; ++i) CHECK(f[i] == expected[i]);
}

TEST_CASE("hand-computed three-packet flow") {
    Flow flow = make_flow({packet("a|1|b|443|tcp", 0.0, Direction::Outgoing, 100),
                           packet("a|1|b|443|tcp", 0.1, Direction::Outgoing, 200),
                           packet("a|1|b|443|tcp", 0.2, Direction::Incoming, 300)});
    FeatureVector f = extract_features(flow);

    CHECK(f[0] == 150.0);
    CHECK(f[1] == 150.0);
    CHECK(f[2] == 2500.0); // population variance of {100,200}
    CHECK(f[3] == 100.0);
    CHECK(f[4] == 200.0);

    CHECK(f[5] == 300.0);
    CHECK(f[6] == 300.0);
    CHECK(f[7] == 0.0);
    CHECK(f[8] == 300.0);
    CHECK(f[9] == 300.0);

    CHECK(f[10] == doctest::Approx(0.1));
    CHECK(f[11] == doctest::Approx(0.1));
    CHECK(f[12] == doctest::Approx(0.0));
    CHECK(f[13] == doctest::Approx(0.1));
    CHECK(f[14] == doctest::Approx(0.1));
    CHECK(f[15] == doctest::Approx(0.2));
}

TEST_CASE("identical sizes and spacing collapse the spread statistics") {
    const double d = 0.25;
    const std::uint32_t s = 333;
    const int m = 7;
    std::vector<PacketRecord> packets;
    for (int i = 0; i < m; ++i)
        packets.push_back(packet("a|1|b|443|tcp", d * i, Direction::Outgoing, s));
    FeatureVector f = extract_features(make_flow(std::move(packets)));

    CHECK(f[2] == 0.0); // size variance
    CHECK(f[10] == doctest::Approx(d));
    CHECK(f[11] == doctest::Approx(d));
    CHECK(f[12] == doctest::Approx(0.0));
    CHECK(f[13] == doctest::Approx(d));
    CHECK(f[14] == doctest::Approx(d));
    CHECK(f[15] == doctest::Approx((m - 1) * d));
}

TEST_CASE("empty flow is rejected") {
    Flow flow;
    flow.conn_key = "a|1|b|443|tcp";
    CHECK_THROWS_AS(extract_features(flow), std::invalid_argument);
}

TEST_CASE("unsorted packets are rejected") {
    Flow flow = make_flow({packet("a|1|b|443|tcp", 1.0, Direction::Outgoing, 100),
                           packet("a|1|b|443|tcp", 0.5, Direction::Outgoing, 100)});
    CHECK_THROWS_AS(extract_features(flow), std::invalid_argument);
}

TEST_CASE("same-timestamp packets can be permuted freely") {
    Flow a = make_flow({packet("a|1|b|443|tcp", 1.0, Direction::Outgoing, 100),
                        packet("a|1|b|443|tcp", 1.0, Direction::Incoming, 900),
                        packet("a|1|b|443|tcp", 2.0, Direction::Outgoing, 70)});
    Flow b = make_flow({packet("a|1|b|443|tcp", 1.0, Direction::Incoming, 900),
                        packet("a|1|b|443|tcp", 1.0, Direction::Outgoing, 100),
                        packet("a|1|b|443|tcp", 2.0, Direction::Outgoing, 70)});
    CHECK(extract_features(a) == extract_features(b));
}

TEST_CASE("per-group statistics are internally consistent on random flows") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        FeatureVector f = extract_features(random_flow(rng));
        for (std::size_t base : {std::size_t{0}, std::size_t{5}, std::size_t{10}}) {
            CHECK(f[base + 2] >= 0.0);         // variance
            CHECK(f[base + 3] <= f[base + 1]); // min <= median
            CHECK(f[base + 1] <= f[base + 4]); // median <= max
            CHECK(f[base + 3] <= f[base + 0]); // min <= mean
            CHECK(f[base + 0] <= f[base + 4]); // mean <= max
        }
        CHECK(f[15] >= 0.0);
    }
}

TEST_CASE("scaler: single vector fit") {
    FeatureVector v{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) v[i] = static_cast<double>(i);
    Scaler s = fit_scaler({v});
    CHECK(s.min() == v);
    CHECK(s.max() == v);
    FeatureVector scaled = s.apply(v);
    for (double x : scaled) CHECK(x == 0.0); // constant columns map to 0
}

TEST_CASE("scaler: column-wise extrema") {
    FeatureVector a{}, b{};
    a[0] = 0.0;
    b[0] = 10.0;
    a[1] = 5.0;
    b[1] = 5.0;
    Scaler s = fit_scaler({a, b});
    CHECK(s.min()[0] == 0.0);
    CHECK(s.max()[0] == 10.0);
    CHECK(s.min()[1] == 5.0);
    CHECK(s.max()[1] == 5.0);

    FeatureVector v{};
    v[0] = 2.5;
    CHECK(s.apply(v)[0] == doctest::Approx(0.25));
    CHECK(s.apply(b)[0] == 1.0);
    CHECK(s.apply(b)[1] == 0.0); // constant column
}

TEST_CASE("scaler: fit-then-transform lands in [0,1] and attains the bounds") {
    Rng rng(11);
    std::vector<FeatureVector> data(100);
    for (FeatureVector& v : data)
        for (double& x : v) x = rng.uniform(-50.0, 50.0);

    Scaler s = fit_scaler(data);
    std::array<bool, kFeatureCount> hit_zero{}, hit_one{};
    for (const FeatureVector& v : data) {
        FeatureVector scaled = s.apply(v);
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            CHECK(scaled[i] >= 0.0);
            CHECK(scaled[i] <= 1.0);
            if (scaled[i] == 0.0) hit_zero[i] = true;
            if (scaled[i] == 1.0) hit_one[i] = true;
        }
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        CHECK(hit_zero[i]);
        CHECK(hit_one[i]);
    }
}

TEST_CASE("scaler: out-of-range values clamp") {
    FeatureVector a{}, b{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        a[i] = 0.0;
        b[i] = 1.0;
    }
    Scaler s = fit_scaler({a, b});
    FeatureVector v{};
    v[0] = -3.0;
    v[1] = 7.0;
    FeatureVector scaled = s.apply(v);
    CHECK(scaled[0] == 0.0);
    CHECK(scaled[1] == 1.0);
}

TEST_CASE("scaler: applying twice after a refit is the identity") {
    Rng rng(13);
    std::vector<FeatureVector> data(40);
    for (FeatureVector& v : data)
        for (double& x : v) x = rng.uniform(0.0, 1000.0);
    // make one column constant
    for (FeatureVector& v : data) v[4] = 42.0;

    Scaler s = fit_scaler(data);
    std::vector<FeatureVector> scaled;
    for (const FeatureVector& v : data) scaled.push_back(s.apply(v));

    Scaler s2 = fit_scaler(scaled);
    for (const FeatureVector& v : scaled) {
        FeatureVector again = s2.apply(v);
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            CHECK(again[i] == doctest::Approx(v[i]).epsilon(1e-12));
    }
}

TEST_CASE("scaler error paths") {
    CHECK_THROWS_AS(fit_scaler({}), std::invalid_argument);
    Scaler unfitted;
    FeatureVector v{};
    CHECK_THROWS_AS(unfitted.apply(v), std::logic_error);
}

TEST_CASE("conn_key round trip") {
    std::string key = make_conn_key("10.0.0.1", 5353, "1.1.1.1", 443);
    ConnKeyParts parts;
    REQUIRE(parse_conn_key(key, parts));
    CHECK(parts.src_ip == "10.0.0.1");
    CHECK(parts.src_port == "5353");
    CHECK(parts.dst_ip == "1.1.1.1");
    CHECK(parts.dst_port == "443");
    CHECK(parts.proto == "tcp");
    CHECK_FALSE(parse_conn_key("only|three|parts", parts));
}
