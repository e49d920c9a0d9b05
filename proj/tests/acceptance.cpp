// One PASS/FAIL line per acceptance criterion; nonzero exit if any fails.

#include <array>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "audioaid/audioaid.hpp"
#include "audioaid/cli.hpp"
#include "golden.hpp"
#include "support.hpp"

using namespace audioaid;
using namespace audioaid::imaging;
using testsupport::TempDir;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass;
    std::string detail;
};

auto quiet = [](const std::string&) {};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// ---- 1: NMS ------------------------------------------------------------------

double plain_iou(const Box& p, const Box& q)
{
    const double iw = std::max(0.0, std::min(p.x2, q.x2) - std::max(p.x1, q.x1));
    const double ih = std::max(0.0, std::min(p.y2, q.y2) - std::max(p.y1, q.y1));
    const double inter = iw * ih;
    const double uni = (p.x2 - p.x1) * (p.y2 - p.y1) + (q.x2 - q.x1) * (q.y2 - q.y1) - inter;
    return uni > 0 ? inter / uni : 0.0;
}

std::vector<Detection> brute_nms(std::vector<Detection> dets, double thr)
{
    std::vector<Detection> kept;
    std::vector<bool> alive(dets.size(), true);
    auto before = [](const Detection& a, const Detection& b) {
        return std::make_tuple(-a.confidence, a.class_id, a.box.x1, a.box.y1) <
               std::make_tuple(-b.confidence, b.class_id, b.box.x1, b.box.y1);
    };
    for (;;) {
        int best = -1;
        for (std::size_t i = 0; i < dets.size(); ++i) {
            if (alive[i] && (best < 0 || before(dets[i], dets[best]))) best = static_cast<int>(i);
        }
        if (best < 0) return kept;
        alive[best] = false;
        kept.push_back(dets[best]);
        for (std::size_t j = 0; j < dets.size(); ++j) {
            if (alive[j] && dets[j].class_id == dets[best].class_id && plain_iou(dets[best].box, dets[j].box) > thr) {
                alive[j] = false;
            }
        }
    }
}

Outcome criterion_nms()
{
    const auto t0 = Clock::now();
    const auto& labels = LabelTable::defaults();
    std::mt19937 rng(1);
    std::uniform_int_distribution<int> count(0, 12), cls(0, 2), pos(0, 60), side(1, 40), conf(1, 20);
    std::uniform_real_distribution<double> thr(0.1, 0.9);
    int mismatches = 0, not_idempotent = 0;
    for (int i = 0; i < 500; ++i) {
        std::vector<Detection> dets;
        const int n = count(rng);
        for (int k = 0; k < n; ++k) {
            const double x = pos(rng), y = pos(rng);
            const int c = cls(rng);
            dets.push_back({{x, y, x + side(rng), y + side(rng)}, c, labels.name(c), conf(rng) / 20.0});
        }
        const double t = thr(rng);
        const auto got = nms(dets, t, false);
        if (got != brute_nms(dets, t)) ++mismatches;
        if (nms(got, t, false) != got) ++not_idempotent;
    }
    const double elapsed = seconds_since(t0);
    std::ostringstream d;
    d << "mismatches=" << mismatches << " non_idempotent=" << not_idempotent << " seconds=" << elapsed;
    return {mismatches == 0 && not_idempotent == 0 && elapsed < 5.0, d.str()};
}

// ---- 2: IoU ------------------------------------------------------------------

double grid_iou(int ax1, int ay1, int ax2, int ay2, int bx1, int by1, int bx2, int by2)
{
    long inter = 0, a = 0, b = 0;
    for (int y = std::min(ay1, by1); y < std::max(ay2, by2); ++y) {
        for (int x = std::min(ax1, bx1); x < std::max(ax2, bx2); ++x) {
            const bool ina = x >= ax1 && x < ax2 && y >= ay1 && y < ay2;
            const bool inb = x >= bx1 && x < bx2 && y >= by1 && y < by2;
            a += ina;
            b += inb;
            inter += ina && inb;
        }
    }
    const long uni = a + b - inter;
    return uni == 0 ? 0.0 : double(inter) / double(uni);
}

Outcome criterion_iou()
{
    std::mt19937 rng(2);
    std::uniform_int_distribution<int> pos(0, 50), side(0, 30);
    int failures = 0;
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const int ax = pos(rng), ay = pos(rng), aw = side(rng), ah = side(rng);
        const int bx = pos(rng), by = pos(rng), bw = side(rng), bh = side(rng);
        const Box a{double(ax), double(ay), double(ax + aw), double(ay + ah)};
        const Box b{double(bx), double(by), double(bx + bw), double(by + bh)};
        const double v = iou(a, b);
        const double err = std::abs(v - grid_iou(ax, ay, ax + aw, ay + ah, bx, by, bx + bw, by + bh));
        worst = std::max(worst, err);
        bool ok = v >= 0 && v <= 1 && v == iou(b, a) && err <= 1e-9;
        if (a.area() > 0) ok = ok && iou(a, a) == 1.0;
        failures += !ok;
    }
    std::ostringstream d;
    d << "failures=" << failures << " max_abs_err=" << worst;
    return {failures == 0, d.str()};
}

// ---- 3: Otsu -----------------------------------------------------------------

// Maximizes (S*w0 - N*s0)^2 / (w0*w1) with exact integer cross-multiplication.
int exhaustive_otsu(const Raster& r)
{
    std::array<long long, 256> h{};
    for (auto v : r.samples()) ++h[v];
    long long n = 0, total = 0;
    for (int v = 0; v < 256; ++v) n += h[v], total += v * h[v];
    int best = -1;
    __int128 best_num = 0, best_den = 1;
    for (int t = 0; t < 255; ++t) {
        long long w0 = 0, s0 = 0;
        for (int v = 0; v <= t; ++v) w0 += h[v], s0 += v * h[v];
        const long long w1 = n - w0;
        if (w0 == 0 || w1 == 0) continue;
        const __int128 diff = static_cast<__int128>(total) * w0 - static_cast<__int128>(n) * s0;
        const __int128 num = diff * diff;
        const __int128 den = static_cast<__int128>(w0) * w1;
        if (best < 0 || num * best_den > best_num * den) best = t, best_num = num, best_den = den;
    }
    return best;
}

Outcome criterion_otsu()
{
    std::mt19937 rng(3);
    int mismatches = 0, checked = 0;
    for (int i = 0; i < 100; ++i) {
        Raster r(32, 32, 1);
        // Mix of uniform, bimodal and few-level rasters so ties actually occur.
        const int style = i % 3;
        std::uniform_int_distribution<int> any(0, 255), lo(10, 90), hi(150, 240), level(0, 3);
        for (auto& s : r.samples()) {
            if (style == 0) s = static_cast<std::uint8_t>(any(rng));
            else if (style == 1) s = static_cast<std::uint8_t>(rng() % 2 ? lo(rng) : hi(rng));
            else s = static_cast<std::uint8_t>(level(rng) * 60);
        }
        const int want = exhaustive_otsu(r);
        if (want < 0) continue;
        ++checked;
        if (otsu_threshold(r) != want) ++mismatches;
    }
    std::ostringstream d;
    d << "checked=" << checked << " mismatches=" << mismatches;
    return {checked == 100 && mismatches == 0, d.str()};
}

// ---- 4, 5: OCR ---------------------------------------------------------------

std::string recognized(const Raster& page, const OcrConfig& cfg)
{
    std::vector<std::string> lines;
    for (const auto& b : recognize_text(page, cfg)) lines.push_back(b.text);
    return testsupport::joined_text(lines);
}

Outcome criterion_ocr_clean()
{
    int exact = 0, full_conf = 0, total = 0;
    for (const auto& s : testsupport::ocr_corpus()) {
        ++total;
        auto blocks = recognize_text(s.page);
        if (blocks.size() == 1 && blocks[0].text == s.text) ++exact;
        if (blocks.size() == 1 && blocks[0].confidence == 1.0) ++full_conf;
    }
    std::ostringstream d;
    d << "exact=" << exact << "/" << total << " confidence_1=" << full_conf << "/" << total;
    return {exact == total && full_conf == total, d.str()};
}

Outcome criterion_ocr_noise()
{
    OcrConfig plain, denoise;
    denoise.denoise = true;
    std::size_t chars = 0, err_plain = 0, err_denoise = 0;
    unsigned seed = 1000;
    for (const auto& s : testsupport::ocr_corpus()) {
        const auto noisy = testsupport::salt_and_pepper(s.page, 0.02, seed++);
        chars += s.text.size();
        err_plain += testsupport::levenshtein(s.text, recognized(noisy, plain));
        err_denoise += testsupport::levenshtein(s.text, recognized(noisy, denoise));
    }
    const double acc_plain = 1.0 - double(err_plain) / double(chars);
    const double acc = 1.0 - double(err_denoise) / double(chars);
    std::ostringstream d;
    d << "char_accuracy=" << acc << " baseline_without_denoise=" << acc_plain;
    return {acc >= 0.95, d.str()};
}

// ---- 6: golden transcript -----------------------------------------------------

Outcome criterion_golden()
{
    const auto golden = testsupport::read_file(testsupport::kGoldenDir / "transcript.txt");
    const auto reference = testsupport::run_golden(Execution::Reference);
    const auto concurrent = testsupport::run_golden(Execution::Concurrent);

    TempDir dir;
    const auto t = (dir / "t.txt").string();
    const std::string src = testsupport::kGoldenDir.string();
    const std::string script = (testsupport::kGoldenDir / "script.json").string();
    const char* argv[] = {"audioaid", "run", "--source-dir", src.c_str(), "--script", script.c_str(),
                          "--frame-period-ms", "500", "--transcript", t.c_str()};
    std::ostringstream out, err;
    const int code = run_cli(10, argv, out, err);
    const auto via_cli = testsupport::read_file(t);

    // Structural checks on the checked-in file itself.
    const auto hazard = golden.find("1.500\thazard\t");
    const auto frame3_object = golden.find("1.500\tnormal\t");
    std::size_t center_person = 0;
    for (std::size_t p = 0; (p = golden.find("\tperson, center\n", p)) != std::string::npos; ++p) ++center_person;
    const bool structure = hazard != std::string::npos && frame3_object != std::string::npos &&
                           hazard < frame3_object && center_person == 1;

    std::ostringstream d;
    d << "reference=" << (reference == golden) << " concurrent=" << (concurrent == golden)
      << " cli=" << (code == 0 && via_cli == golden) << " structure=" << structure;
    return {reference == golden && concurrent == golden && code == 0 && via_cli == golden && structure, d.str()};
}

// ---- 7: freshest frame --------------------------------------------------------

Outcome criterion_freshest()
{
    PipelineConfig cfg;
    cfg.pacing = Pacing::Live;
    cfg.queue_capacity = 2;
    SyntheticSource source(200, 64, 48, 1, 0.010);
    ScriptedDetector detector({}, std::chrono::milliseconds(100));
    SpeechSink sink(std::vector<std::unique_ptr<Voice>>{}, {}, quiet);
    const auto m = run_detection_mode(cfg, source, detector, sink, nullptr, quiet);
    std::ostringstream d;
    d << "sourced=" << m.sourced << " processed=" << m.processed << " dropped=" << m.dropped
      << " max_dispatch_lag=" << m.max_dispatch_lag;
    return {m.sourced == 200 && m.dropped > 0 && m.sourced == m.processed + m.dropped && m.max_dispatch_lag <= 2,
            d.str()};
}

// ---- 8: overhead --------------------------------------------------------------

std::optional<double> report_field(const std::string& report, const std::string& stage, const std::string& key)
{
    std::istringstream in(report);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(stage + " ", 0) != 0) continue;
        const auto p = line.find(key + "=");
        if (p == std::string::npos) return std::nullopt;
        const auto start = p + key.size() + 1;
        const auto text = line.substr(start, line.find(' ', start) - start);
        if (text.empty()) return std::nullopt;
        return std::stod(text);
    }
    return std::nullopt;
}

Outcome criterion_overhead()
{
    TempDir dir;
    const auto frames = dir / "frames";
    std::filesystem::create_directory(frames);
    for (int i = 0; i < 100; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03d.pgm", i);
        pnm::write(frames / name, SyntheticSource::make(i, 640, 480, 1));
    }
    const std::string src = frames.string();
    const std::string metrics = (dir / "m.txt").string();
    const char* argv[] = {"audioaid", "bench", "--source-dir", src.c_str(), "--metrics", metrics.c_str()};
    std::ostringstream out, err;
    const int code = run_cli(6, argv, out, err);
    const auto report = out.str();
    const auto p95 = report_field(report, "overhead_ms", "p95");

    // Byte stability on a recorded run.
    PipelineConfig cfg;
    FileSource source(FileSource::list_directory(frames), 0.1);
    ScriptedDetector detector;
    SpeechSink sink(std::vector<std::unique_ptr<Voice>>{}, {}, quiet);
    const Metrics recorded = run_detection_mode(cfg, source, detector, sink, nullptr, quiet);
    const bool stable = metrics_report(recorded) == metrics_report(recorded) &&
                        metrics_report(Metrics(recorded)) == metrics_report(recorded) &&
                        testsupport::read_file(metrics) == report;

    std::ostringstream d;
    d << "exit=" << code << " overhead_p95_ms=" << (p95 ? std::to_string(*p95) : "n/a") << " stable=" << stable;
    const bool counted = report.rfind("frames_sourced 100\nframes_processed 100\nframes_dropped 0\n", 0) == 0;
    return {code == 0 && counted && p95 && *p95 < 10.0 && stable, d.str()};
}

// ---- 9: adapters --------------------------------------------------------------

std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

Outcome criterion_adapters()
{
    TempDir dir;
    const auto& labels = LabelTable::defaults();

    // Detector echo round trip.
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> coord(0, 500), conf(0, 1);
    std::uniform_int_distribution<int> cls(0, static_cast<int>(labels.size()) - 1), count(0, 4);
    std::map<std::int64_t, std::vector<Detection>> injected;
    std::string table;
    for (std::int64_t id = 0; id < 20; ++id) {
        nlohmann::ordered_json resp;
        resp["id"] = id;
        resp["detections"] = nlohmann::ordered_json::array();
        const int n = count(rng);
        for (int k = 0; k < n; ++k) {
            const double x = coord(rng), y = coord(rng);
            const int c = cls(rng);
            Detection det{{x, y, x + coord(rng) / 5, y + coord(rng) / 5}, c, labels.name(c), conf(rng)};
            injected[id].push_back(det);
            resp["detections"].push_back(to_record(det));
        }
        table += std::to_string(id) + "\t" + resp.dump() + "\n";
    }
    testsupport::write_file(dir / "responses.tsv", table);
    int detector_mismatch = 0;
    {
        ExternalDetectorConfig cfg;
        cfg.command = "sh " + quote(testsupport::kStubDir / "echo_detector.sh") + " " + quote(dir / "responses.tsv");
        ExternalProcessDetector det(cfg, labels);
        for (std::int64_t id = 0; id < 20; ++id) {
            Frame f{Raster(8, 8, 1, 0), id, 0, dir / "frame.pgm"};
            if (det.detect(f) != injected[id]) ++detector_mismatch;
        }
    }

    // Speech engine: serialization and priority order over 20 utterances.
    const auto spoken = dir / "spoken.txt";
    const std::string cmd = "sh " + quote(testsupport::kStubDir / "speech_stub.sh") + " " + quote(spoken) + " " +
                            quote(dir / "lock") + " 0.01 {text}";
    std::string expected;
    {
        auto sink = external_engine_sink(cmd, std::chrono::milliseconds(3000), {}, quiet);
        std::vector<std::string> normals, hazards;
        for (int i = 0; i < 20; ++i) {
            const bool hz = i % 5 == 4;
            const std::string text = (hz ? "hazard " : "object ") + std::to_string(i);
            (hz ? hazards : normals).push_back(text);
            sink->enqueue({text, hz ? Priority::Hazard : Priority::Normal, 0.0});
        }
        // Queued before the worker starts, so hazards all come first.
        for (const auto& h : hazards) expected += h + "\n";
        for (const auto& n : normals) expected += n + "\n";
        sink->start();
        sink->close();
    }
    const auto got = testsupport::read_file(spoken);
    const bool overlap = got.find("OVERLAP") != std::string::npos;

    std::ostringstream d;
    d << "detector_mismatches=" << detector_mismatch << " speech_order_ok=" << (got == expected)
      << " overlap=" << overlap;
    return {detector_mismatch == 0 && got == expected && !overlap, d.str()};
}

}  // namespace

int main()
{
    process::ignore_sigpipe();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"nms oracle equivalence", criterion_nms},
        {"iou properties", criterion_iou},
        {"otsu oracle equivalence", criterion_otsu},
        {"ocr clean round trip", criterion_ocr_clean},
        {"ocr noise robustness", criterion_ocr_noise},
        {"golden end-to-end transcript", criterion_golden},
        {"freshest-frame policy", criterion_freshest},
        {"pipeline overhead", criterion_overhead},
        {"adapter round trips", criterion_adapters},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " " << criteria[i].first << ": "
                  << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
