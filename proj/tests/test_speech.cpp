#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "audioaid/speech.hpp"
#include "support.hpp"

using namespace audioaid;
using testsupport::TempDir;

namespace {

struct Recording {
    std::unique_ptr<SpeechSink> sink;
    MemoryVoice* voice = nullptr;
};

Recording memory_sink(SpeechOptions opts = {})
{
    auto voice = std::make_unique<MemoryVoice>();
    Recording r;
    r.voice = voice.get();
    std::vector<std::unique_ptr<Voice>> voices;
    voices.push_back(std::move(voice));
    r.sink = std::make_unique<SpeechSink>(std::move(voices), opts, [](const std::string&) {});
    return r;
}

Utterance normal(const std::string& t, double at = 0) { return {t, Priority::Normal, at}; }
Utterance hazard(const std::string& t, double at = 0) { return {t, Priority::Hazard, at}; }

std::vector<std::string> texts(const std::vector<Utterance>& us)
{
    std::vector<std::string> out;
    for (const auto& u : us) out.push_back(u.text);
    return out;
}

std::string sh(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Transcript, LineFormat)
{
    EXPECT_EQ(transcript_line({"person, left", Priority::Normal, 1.234}), "1.234\tnormal\tperson, left\n");
    EXPECT_EQ(transcript_line({"caution: hole ahead, center, near", Priority::Hazard, 0}),
              "0.000\thazard\tcaution: hole ahead, center, near\n");
    EXPECT_EQ(transcript_line({"x", Priority::Normal, 12.3456}), "12.346\tnormal\tx\n");
}

TEST(Transcript, FileCreatedOnOpenAndAppended)
{
    TempDir dir;
    const auto path = dir / "t.txt";
    {
        auto sink = transcript_sink(path);
        EXPECT_TRUE(std::filesystem::exists(path));
        EXPECT_EQ(testsupport::read_file(path), "");
        sink->enqueue(normal("person, left", 1.234));
        sink->wait_idle();
        EXPECT_EQ(testsupport::read_file(path), "1.234\tnormal\tperson, left\n");
    }
    EXPECT_EQ(testsupport::read_file(path), "1.234\tnormal\tperson, left\n");
}

TEST(Transcript, UnwritablePathIsIoError)
{
    try {
        TranscriptVoice v("/nonexistent-dir/for/sure/t.txt");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Io);
    }
}

TEST(SpeechSink, HazardJumpsQueue)
{
    auto r = memory_sink();
    r.sink->enqueue(normal("N1"));
    r.sink->enqueue(normal("N2"));
    r.sink->enqueue(hazard("H1"));
    r.sink->enqueue(hazard("H2"));
    r.sink->close();
    EXPECT_EQ(texts(r.voice->spoken()), (std::vector<std::string>{"H1", "H2", "N1", "N2"}));
}

TEST(SpeechSink, FullQueueRejectsNormalButAcceptsHazard)
{
    auto r = memory_sink();
    for (int i = 0; i < 32; ++i) EXPECT_TRUE(r.sink->enqueue(normal("n" + std::to_string(i))));
    EXPECT_FALSE(r.sink->enqueue(normal("overflow")));
    EXPECT_TRUE(r.sink->enqueue(hazard("hole")));
    EXPECT_EQ(r.sink->queued(), 33u);
    EXPECT_EQ(r.sink->stats().rejected, 1u);
    r.sink->close();
    auto spoken = texts(r.voice->spoken());
    ASSERT_EQ(spoken.size(), 33u);
    EXPECT_EQ(spoken.front(), "hole");
    EXPECT_EQ(std::count(spoken.begin(), spoken.end(), "overflow"), 0);
}

TEST(SpeechSink, StaleNormalsDroppedWhenHazardArrives)
{
    auto r = memory_sink();
    r.sink->enqueue(normal("old", 1.0));
    r.sink->enqueue(normal("edge", 5.0));
    r.sink->enqueue(normal("fresh", 9.0));
    r.sink->enqueue(hazard("H", 10.0));
    r.sink->close();
    EXPECT_EQ(texts(r.voice->spoken()), (std::vector<std::string>{"H", "edge", "fresh"}));
    EXPECT_EQ(r.sink->stats().dropped_stale, 1u);
}

TEST(SpeechSink, ClosedSinkRefuses)
{
    auto r = memory_sink();
    r.sink->close();
    try {
        r.sink->enqueue(normal("late"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SinkClosed);
    }
    EXPECT_THROW(r.sink->enqueue(normal("")), Error);
}

TEST(SpeechSink, WorkerSpeaksEverything)
{
    auto r = memory_sink();
    r.sink->start();
    for (int i = 0; i < 20; ++i) r.sink->enqueue(normal("u" + std::to_string(i), i));
    r.sink->wait_idle();
    EXPECT_EQ(r.voice->spoken().size(), 20u);
    EXPECT_EQ(r.sink->queued(), 0u);
    r.sink->close();
    EXPECT_EQ(r.sink->stats().spoken, 20u);
}

// Independent model of the queue: a list with hazard insertion, stale purge
// and normal-only capacity.
TEST(SpeechSink, RandomOperationsMatchReplayOracle)
{
    std::mt19937 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        SpeechOptions opts;
        opts.capacity = 1 + rng() % 8;
        auto r = memory_sink(opts);
        std::vector<Utterance> model, expected_spoken;
        double clock = 0;
        for (int op = 0; op < 120; ++op) {
            clock += (rng() % 20) / 10.0;
            const int kind = static_cast<int>(rng() % 10);
            if (kind < 2) {
                r.sink->pump();
                expected_spoken.insert(expected_spoken.end(), model.begin(), model.end());
                model.clear();
                continue;
            }
            const bool is_hazard = kind < 4;
            Utterance u{(is_hazard ? "H" : "N") + std::to_string(op), is_hazard ? Priority::Hazard : Priority::Normal,
                        clock};
            bool accepted = true;
            if (is_hazard) {
                std::vector<Utterance> kept;
                for (const auto& q : model) {
                    if (q.priority == Priority::Normal && q.created_at < clock - opts.stale_after) continue;
                    kept.push_back(q);
                }
                std::size_t pos = 0;
                while (pos < kept.size() && kept[pos].priority == Priority::Hazard) ++pos;
                kept.insert(kept.begin() + static_cast<std::ptrdiff_t>(pos), u);
                model = kept;
            } else if (model.size() >= opts.capacity) {
                accepted = false;
            } else {
                model.push_back(u);
            }
            ASSERT_EQ(r.sink->enqueue(u), accepted);
        }
        r.sink->close();
        expected_spoken.insert(expected_spoken.end(), model.begin(), model.end());
        ASSERT_EQ(r.voice->spoken(), expected_spoken) << "trial " << trial;
    }
}

TEST(EngineVoice, TemplateWithoutPlaceholderIsConfigError)
{
    try {
        EngineVoice v("espeak hello", std::chrono::milliseconds(100));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
}

TEST(EngineVoice, SpokenInOrderWithoutOverlap)
{
    TempDir dir;
    const auto out = dir / "spoken.txt";
    const auto lock = dir / "lock";
    const std::string cmd =
        "sh " + sh(testsupport::kStubDir / "speech_stub.sh") + " " + sh(out) + " " + sh(lock) + " 0.02 {text}";
    auto sink = external_engine_sink(cmd, std::chrono::milliseconds(2000), {}, [](const std::string&) {});
    sink->start();
    std::vector<std::string> expected;
    for (int i = 0; i < 6; ++i) {
        sink->enqueue(normal("item " + std::to_string(i)));
        expected.push_back("item " + std::to_string(i));
    }
    sink->close();
    std::string want;
    for (const auto& e : expected) want += e + "\n";
    EXPECT_EQ(testsupport::read_file(out), want);
    EXPECT_EQ(sink->stats().spoken, 6u);
}

TEST(EngineVoice, TimeoutDropsAndContinues)
{
    TempDir dir;
    const auto out = dir / "spoken.txt";
    std::vector<std::string> logs;
    std::mutex mu;
    auto log = [&](const std::string& m) {
        std::lock_guard lock(mu);
        logs.push_back(m);
    };
    // "slow" sleeps past the timeout; everything else is written at once.
    const std::string cmd = "sh -c 'if [ \"$1\" = slow ]; then sleep 5; fi; printf \"%s\\n\" \"$1\" >> " +
                            out.string() + "' sh {text}";
    auto sink = external_engine_sink(cmd, std::chrono::milliseconds(200), {}, log);
    sink->enqueue(normal("slow"));
    sink->enqueue(normal("next"));
    const auto t0 = std::chrono::steady_clock::now();
    sink->close();
    EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(3));
    EXPECT_EQ(testsupport::read_file(out), "next\n");
    EXPECT_EQ(sink->stats().dropped_by_voice, 1u);
    EXPECT_EQ(sink->stats().spoken, 1u);
    ASSERT_FALSE(logs.empty());
    EXPECT_NE(logs[0].find("timed out"), std::string::npos);
}

TEST(EngineVoice, MissingBinaryIsLoggedNotFatal)
{
    std::vector<std::string> logs;
    auto sink = external_engine_sink("/no/such/speech-engine {text}", std::chrono::milliseconds(500), {},
                                     [&](const std::string& m) { logs.push_back(m); });
    sink->enqueue(normal("one"));
    sink->enqueue(normal("two"));
    sink->close();
    EXPECT_EQ(sink->stats().dropped_by_voice, 2u);
    EXPECT_EQ(logs.size(), 2u);
}

TEST(StreamVoice, WritesTranscriptLines)
{
    std::ostringstream os;
    std::vector<std::unique_ptr<Voice>> voices;
    voices.push_back(std::make_unique<StreamVoice>(os));
    SpeechSink sink(std::move(voices));
    sink.enqueue(normal("a", 0.5));
    sink.enqueue(hazard("b", 0.5));
    sink.close();
    EXPECT_EQ(os.str(), "0.500\thazard\tb\n0.500\tnormal\ta\n");
}
