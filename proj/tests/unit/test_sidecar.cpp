#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "dsm/error.hpp"
#include "dsm/fixture_provider.hpp"
#include "dsm/sidecar_client.hpp"

using namespace dsm;
using namespace std::chrono_literals;

namespace {

std::string serve(const std::string& flags = {}) {
  return std::string("'") + DSM_TOOL_PATH + "' serve-fixture " + flags;
}

const std::vector<std::string> kWords{"the", "kids", "run", "home", "."};

}  // namespace

TEST(Sidecar, HandshakeCarriesModelShape) {
  SidecarClient c(serve("--model tiny --layers 3 --heads 2"), 10s);
  EXPECT_EQ(c.hello(), (Handshake{"tiny", 3, 2}));
}

TEST(Sidecar, AnswersMatchInProcessFixture) {
  SidecarClient c(serve("--seed 4 --heads 3 --split-subwords"), 10s);
  FixtureOptions o;
  o.seed = 4;
  o.heads = 3;
  o.split_subwords = true;
  ModelResponse expected = fixture_attention(kWords, {1, 2}, o);
  ModelResponse got = c.attention(kWords, {1, 2});
  expected.id = got.id;
  EXPECT_EQ(got, expected);

  FixtureProvider local(o);
  EXPECT_EQ(c.mlm_topk(kWords, 1, 6), local.mlm_topk(kWords, 1, 6));
  EXPECT_EQ(c.upos(kWords), local.upos(kWords));
}

TEST(Sidecar, ConcurrentCallersGetTheirOwnReplies) {
  SidecarClient c(serve("--heads 1"), 10s);
  std::vector<std::thread> pool;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 8; ++t) {
    pool.emplace_back([&, t] {
      for (int r = 0; r < 20; ++r) {
        std::vector<std::string> words{"w" + std::to_string(t), "x" + std::to_string(r), "."};
        ModelResponse expected = fixture_attention(words, {0}, 1, 0);
        ModelResponse got = c.attention(words, {0});
        expected.id = got.id;
        if (!(got == expected)) ++mismatches;
      }
    });
  }
  for (auto& th : pool) th.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(Sidecar, BackendErrorPayloadIsSurfaced) {
  SidecarClient c(serve("--fail-op mlm_topk"), 10s);
  try {
    c.mlm_topk(kWords, 1, 3);
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("injected failure for mlm_topk"), std::string::npos);
  }
  EXPECT_NO_THROW(c.attention(kWords, {0}));
}

TEST(Sidecar, BackendRejectsLayerOutsideDepth) {
  SidecarClient c(serve("--layers 2"), 10s);
  EXPECT_THROW(c.attention(kWords, {5}), BackendError);
}

TEST(Sidecar, ClosedBackendIsTransportError) {
  EXPECT_THROW(SidecarClient("true", 5s), TransportError);
}

TEST(Sidecar, ExitMidSessionIsTransportError) {
  SidecarClient c(serve("--exit-after 2"), 10s);
  EXPECT_NO_THROW(c.upos(kWords));
  EXPECT_NO_THROW(c.upos(kWords));
  EXPECT_THROW(c.upos(kWords), TransportError);
  EXPECT_THROW(c.upos(kWords), TransportError);
}

TEST(Sidecar, SilentBackendTimesOutOnHandshake) {
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(SidecarClient("sleep 5", 200ms), TimeoutError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 4s);
}

TEST(Sidecar, SlowReplyTimesOut) {
  SidecarClient c(serve("--delay-ms 1500"), 300ms);
  try {
    c.upos(kWords);
    FAIL() << "expected TimeoutError";
  } catch (const TimeoutError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kProvider);
  }
}
