#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <thread>

#include "navlab/serve.hpp"
#include "test_support.hpp"

using namespace navlab;
using serve::ErrorKind;

namespace {

std::string random_id(SplitMixStream& rng) {
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789-_/\"\\ é";
    std::string s;
    const int n = 1 + static_cast<int>(rng.uniform() * 12);
    for (int i = 0; i < n; ++i) {
        const char c = alphabet[static_cast<std::size_t>(rng.uniform() * (alphabet.size() - 2))];
        s.push_back(c);
    }
    return s;
}

double random_double(SplitMixStream& rng) {
    switch (static_cast<int>(rng.uniform() * 4)) {
        case 0: return rng.uniform();
        case 1: return std::ldexp(rng.uniform(), static_cast<int>(rng.uniform() * 60) - 30);
        case 2: return 0.0;
        default: return static_cast<double>(rng() % 1000);
    }
}

serve::ObservationFrame random_observation(SplitMixStream& rng) {
    serve::ObservationFrame f;
    f.session_id = random_id(rng);
    f.step = rng() >> static_cast<int>(rng.uniform() * 64);
    const std::size_t rays = 1 + static_cast<std::size_t>(rng.uniform() * 20);
    for (std::size_t i = 0; i < rays; ++i) f.observation.depth_rays.push_back(random_double(rng));
    f.observation.goal_bearing = (rng.uniform() - 0.5) * 6.0;
    f.observation.goal_distance = random_double(rng);
    f.observation.step_fraction = rng.uniform();
    f.client_send_time = static_cast<std::int64_t>(rng() >> 2) * (rng.uniform() < 0.5 ? -1 : 1);
    if (rng.uniform() < 0.3) f.instruction = "walk " + random_id(rng);
    return f;
}

serve::Response random_response(SplitMixStream& rng) {
    if (rng.uniform() < 0.7) {
        serve::ActionFrame a;
        a.session_id = random_id(rng);
        a.step = rng() >> 3;
        const std::size_t n = static_cast<std::size_t>(rng.uniform() * 6);
        for (std::size_t i = 0; i < n; ++i) a.actions.push_back(env::kAllActions[rng() % env::kActionCount]);
        a.latent_step = rng() >> 5;
        a.server_receive_time = static_cast<std::int64_t>(rng() >> 1);
        a.server_send_time = static_cast<std::int64_t>(rng() >> 1);
        return a;
    }
    serve::ErrorFrame e;
    e.kind = static_cast<ErrorKind>(rng() % 5);
    e.message = random_id(rng);
    if (rng.uniform() < 0.5) e.session_id = random_id(rng);
    if (rng.uniform() < 0.5) e.step = rng() >> 4;
    return e;
}

std::string payload_of(const std::string& frame) { return frame.substr(4); }

struct Served {
    env::SceneLibrary scenes = fixtures::bundled_scenes();
    std::vector<env::Episode> episodes =
        env::load_episodes(fixtures::data_dir() / "episodes" / "nav_suite.jsonl", scenes);
    policy::FisPolicy model{policy::feature_width(16), 16, 32};
    policy::ParamVector params = policy::init_params(model, 99, 1.0);
};

serve::ServerConfig config() {
    serve::ServerConfig cfg;
    cfg.seed = 17;
    cfg.truncation_timeout = std::chrono::milliseconds(100);
    return cfg;
}

}  // namespace

TEST(Serve, FramesRoundTripBitExactly) {
    SplitMixStream rng(71);
    for (int i = 0; i < 10000; ++i) {
        const auto obs = random_observation(rng);
        const std::string bytes = serve::encode(obs);
        ASSERT_EQ(serve::encode_frame(payload_of(bytes)), bytes);
        const auto back = serve::decode_observation(payload_of(bytes));
        ASSERT_EQ(back, obs);
        ASSERT_EQ(serve::encode(back), bytes);

        const auto resp = random_response(rng);
        const std::string rb = std::visit([](const auto& f) { return serve::encode(f); }, resp);
        ASSERT_EQ(serve::decode_response(payload_of(rb)), resp);
    }
}

TEST(Serve, LengthPrefixIsBigEndian) {
    const std::string f = serve::encode_frame("abc");
    ASSERT_EQ(f.size(), 7u);
    EXPECT_EQ(f.substr(0, 4), std::string("\0\0\0\3", 4));
    const std::string big = serve::encode_frame(std::string(300, 'x'));
    EXPECT_EQ(static_cast<unsigned char>(big[2]), 1);
    EXPECT_EQ(static_cast<unsigned char>(big[3]), 44);
}

TEST(Serve, FrameReaderReassemblesArbitrarySplits) {
    SplitMixStream rng(72);
    std::vector<serve::ObservationFrame> frames;
    std::string stream;
    for (int i = 0; i < 200; ++i) {
        frames.push_back(random_observation(rng));
        stream += serve::encode(frames.back());
    }
    serve::FrameReader reader;
    std::vector<serve::ObservationFrame> got;
    std::size_t pos = 0;
    while (pos < stream.size()) {
        const std::size_t n = std::min<std::size_t>(1 + rng() % 97, stream.size() - pos);
        reader.feed(std::string_view(stream).substr(pos, n));
        pos += n;
        while (auto p = reader.next()) got.push_back(serve::decode_observation(*p));
    }
    EXPECT_EQ(got, frames);
    EXPECT_EQ(reader.buffered(), 0u);

    serve::FrameReader over;
    over.feed(std::string("\x00\x20\x00\x01", 4));
    EXPECT_THROW(over.next(), serve::ProtocolError);
}

TEST(Serve, DecoderRejectsMalformedPayloads) {
    const std::vector<std::string> bad{
        "not json",
        "[1,2]",
        R"({"step":0,"observation":{"depth_rays":[1],"goal_bearing":0,"goal_distance":1,"step_fraction":0},"client_send_time":0})",
        R"({"session_id":"","step":0,"observation":{"depth_rays":[1],"goal_bearing":0,"goal_distance":1,"step_fraction":0},"client_send_time":0})",
        R"({"session_id":"a","step":-1,"observation":{"depth_rays":[1],"goal_bearing":0,"goal_distance":1,"step_fraction":0},"client_send_time":0})",
        R"({"session_id":"a","step":0,"observation":{"depth_rays":[],"goal_bearing":0,"goal_distance":1,"step_fraction":0},"client_send_time":0})",
        R"({"session_id":"a","step":0,"observation":{"depth_rays":[-1],"goal_bearing":0,"goal_distance":1,"step_fraction":0},"client_send_time":0})",
        R"({"session_id":"a","step":0,"observation":{"depth_rays":["x"],"goal_bearing":0,"goal_distance":1,"step_fraction":0},"client_send_time":0})",
        R"({"session_id":"a","step":0,"observation":{"depth_rays":[1],"goal_distance":1,"step_fraction":0},"client_send_time":0})",
    };
    for (const std::string& p : bad) {
        try {
            serve::decode_observation(p);
            ADD_FAILURE() << "accepted " << p;
        } catch (const serve::ProtocolError& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Malformed);
        }
    }
}

TEST(Serve, LatencyReportUsesNearestRank) {
    SplitMixStream rng(73);
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = 1 + rng() % 300;
        std::vector<serve::LatencySample> s(n);
        std::vector<double> rt;
        for (auto& x : s) {
            x.round_trip = static_cast<std::int64_t>(rng() % 1000000);
            rt.push_back(static_cast<double>(x.round_trip));
        }
        std::sort(rt.begin(), rt.end());
        auto rank = [&](double p) { return rt[static_cast<std::size_t>(std::ceil(p / 100.0 * n)) - 1]; };
        double mean = 0.0;
        for (double v : rt) mean += v / static_cast<double>(n);
        const auto r = serve::latency_report(s);
        EXPECT_EQ(r.count, n);
        EXPECT_DOUBLE_EQ(r.p50, rank(50));
        EXPECT_DOUBLE_EQ(r.p95, rank(95));
        EXPECT_DOUBLE_EQ(r.max, rt.back());
        EXPECT_NEAR(r.mean, mean, 1e-6 * mean + 1e-9);
    }
    EXPECT_THROW(serve::latency_report({}), std::invalid_argument);
}

TEST(Serve, LatencyTableListsEveryRow) {
    serve::LatencySample s{2000000, 1000000};
    const serve::LatencyReport r = serve::latency_report(std::vector<serve::LatencySample>{s});
    const std::vector<serve::LatencyRow> rows{{"FiS dual", "server (loopback)", r}, {"FiS slow", "server (loopback)", r}};
    const std::string t = serve::render_latency_table(rows);
    EXPECT_NE(t.find("FiS dual"), std::string::npos);
    EXPECT_NE(t.find("2.000"), std::string::npos);
}

TEST(Serve, ServesEpisodesAndEchoesFrames) {
    Served s;
    serve::Server server(s.model, s.params, config());
    const int port = server.start();
    serve::Client client("127.0.0.1", port);
    const auto& e = s.episodes.front();
    const auto log = serve::run_remote_episode(client, e, s.scenes.get(e.scene_id), 40, "solo");
    EXPECT_FALSE(log.actions.empty());
    EXPECT_EQ(log.samples.size(), log.frame_steps.size());
    for (const auto& x : log.samples) {
        EXPECT_GE(x.round_trip, x.server_compute);
        EXPECT_GE(x.server_compute, 0);
    }
    for (std::size_t i = 0; i < log.actions.size(); ++i) EXPECT_EQ(log.latent_steps[i] % 3, 0u);
    EXPECT_EQ(server.frames_served(), log.frame_steps.size());
}

TEST(Serve, ProtocolErrorsKeepTheConnectionOpen) {
    Served s;
    serve::Server server(s.model, s.params, config());
    const int port = server.start();
    serve::Client client("127.0.0.1", port);
    const auto& e = s.episodes.front();
    const auto& scene = s.scenes.get(e.scene_id);

    auto expect_error = [&](ErrorKind kind) {
        const auto r = client.read_response();
        ASSERT_TRUE(std::holds_alternative<serve::ErrorFrame>(r));
        EXPECT_EQ(std::get<serve::ErrorFrame>(r).kind, kind);
    };

    client.send_raw(serve::encode_frame("{oops"));
    expect_error(ErrorKind::Malformed);

    serve::ObservationFrame f;
    f.session_id = "a";
    f.step = 5;
    f.observation = env::observe(e.start, scene, e.goal, 0, 40);
    EXPECT_EQ(client.request_actions(f).step, 5u);
    f.step = 5;
    client.send_raw(serve::encode(f));
    expect_error(ErrorKind::OutOfOrder);
    f.step = 2;
    client.send_raw(serve::encode(f));
    const auto r = client.read_response();
    ASSERT_TRUE(std::holds_alternative<serve::ErrorFrame>(r));
    EXPECT_EQ(std::get<serve::ErrorFrame>(r).kind, ErrorKind::OutOfOrder);
    EXPECT_EQ(std::get<serve::ErrorFrame>(r).session_id, "a");
    EXPECT_EQ(std::get<serve::ErrorFrame>(r).step, 2u);

    f.observation.depth_rays.resize(3);  // wrong width for the policy
    f.step = 6;
    client.send_raw(serve::encode(f));
    expect_error(ErrorKind::Malformed);

    const std::string whole = serve::encode(f);
    client.send_raw(whole.substr(0, whole.size() / 2));
    expect_error(ErrorKind::Truncated);

    f.observation = env::observe(e.start, scene, e.goal, 0, 40);
    f.step = 9;
    EXPECT_EQ(client.request_actions(f).step, 9u);
    EXPECT_EQ(server.protocol_errors(), 5u);
}

TEST(Serve, OversizePrefixClosesTheConnection) {
    Served s;
    serve::Server server(s.model, s.params, config());
    const int port = server.start();
    serve::Client client("127.0.0.1", port);
    client.send_raw(std::string("\x7f\x00\x00\x00", 4));
    const auto r = client.read_response();
    ASSERT_TRUE(std::holds_alternative<serve::ErrorFrame>(r));
    EXPECT_EQ(std::get<serve::ErrorFrame>(r).kind, ErrorKind::Oversize);
    EXPECT_THROW(client.read_response(), serve::ConnectionClosed);

    serve::Client fresh("127.0.0.1", port);
    const auto& e = s.episodes.front();
    EXPECT_NO_THROW(serve::run_remote_episode(fresh, e, s.scenes.get(e.scene_id), 6, "after"));
}

TEST(Serve, ConcurrentSessionsMatchSequentialRuns) {
    Served s;
    const auto& e1 = s.episodes[0];
    const auto& e2 = s.episodes[7];
    auto strip = [](serve::RemoteEpisodeLog log) {
        log.samples.clear();
        return serve::to_json(log);
    };

    nlohmann::json seq1, seq2;
    {
        serve::Server server(s.model, s.params, config());
        const int port = server.start();
        serve::Client c("127.0.0.1", port);
        seq1 = strip(serve::run_remote_episode(c, e1, s.scenes.get(e1.scene_id), 40, "alpha"));
    }
    {
        serve::Server server(s.model, s.params, config());
        const int port = server.start();
        serve::Client c("127.0.0.1", port);
        seq2 = strip(serve::run_remote_episode(c, e2, s.scenes.get(e2.scene_id), 40, "beta"));
    }

    serve::Server server(s.model, s.params, config());
    const int port = server.start();
    nlohmann::json con1, con2;
    std::thread t1([&] {
        serve::Client c("127.0.0.1", port);
        con1 = strip(serve::run_remote_episode(c, e1, s.scenes.get(e1.scene_id), 40, "alpha"));
    });
    std::thread t2([&] {
        serve::Client c("127.0.0.1", port);
        con2 = strip(serve::run_remote_episode(c, e2, s.scenes.get(e2.scene_id), 40, "beta"));
    });
    t1.join();
    t2.join();
    EXPECT_EQ(con1, seq1);
    EXPECT_EQ(con2, seq2);
}

TEST(Serve, SessionSeedsDependOnTheId) {
    EXPECT_EQ(serve::session_seed(1, "a"), serve::session_seed(1, "a"));
    EXPECT_NE(serve::session_seed(1, "a"), serve::session_seed(1, "b"));
    EXPECT_NE(serve::session_seed(1, "a"), serve::session_seed(2, "a"));
}

TEST(Serve, ClientFailsFastWithoutAServer) {
    EXPECT_THROW(serve::Client("127.0.0.1", 1, std::chrono::milliseconds(200)), serve::ConnectionClosed);
}
