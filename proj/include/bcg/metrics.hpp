#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "bcg/confidence.hpp"
#include "bcg/signal.hpp"
#include "bcg/synth.hpp"

namespace bcg {

/// A reference interval and the detected interval paired with it.
struct IntervalPair {
    double rr_ms = 0.0;
    double jj_ms = 0.0;
    double at_ms = 0.0;  // reference time where the interval starts
};

/// Greedy nearest matching of detected to reference peaks within half the
/// median reference interval, one-to-one. An interval is paired when both
/// ends matched and the matches are consecutive on both sides. When
/// `reported` is given, intervals whose ends fall in different reported
/// stretches (or outside them) are dropped. Throws InvalidInput on an empty
/// reference.
std::vector<IntervalPair> pair_intervals(const BeatAnnotation& reference, const BeatAnnotation& detected,
                                         const std::vector<TimeRange>* reported = nullptr);

/// Mean |rr - jj|. Throws UndefinedMetric on no pairs.
double e_abs(const std::vector<IntervalPair>& pairs);

/// Percentage of pairs with |rr - jj| <= threshold_ms.
double precision(const std::vector<IntervalPair>& pairs, double threshold_ms = 30.0);

/// Percentage of d_total_ms covered by the reported ranges.
double coverage(const std::vector<TimeRange>& reported, double d_total_ms);

/// Root mean square of successive interval differences.
double rmssd(const IntervalSeries& intervals);

enum class QualityLevel { A, B, C };
std::string_view to_string(QualityLevel level);

struct QualityThresholds {
    double level_a = 0.85;
    double level_b = 0.60;
    double template_window_ms = 10000.0;
};

/// Mean per-beat correlation against the average of the beats within
/// template_window_ms around it. No usable beats gives C.
double quality_score(const Epoch& epoch, const QualityThresholds& q = {});
QualityLevel quality_level(const Epoch& epoch, const QualityThresholds& q = {});

struct EvalReport {
    double e_abs_ms = 0.0;   // NaN when there are no pairs
    double pre_pct = 0.0;    // NaN when there are no pairs
    double coverage_pct = 0.0;
    std::size_t n_bcg = 0;
    std::size_t n_correct = 0;
    std::size_t n_incorrect = 0;
    double d_detection_ms = 0.0;
    double d_total_ms = 0.0;
    double sum_abs_error_ms = 0.0;
    std::map<std::string, EvalReport> strata;
};

/// Running totals behind an EvalReport; pooled over pairs and durations.
class EvalAccumulator {
public:
    explicit EvalAccumulator(double threshold_ms = 30.0) : threshold_ms_(threshold_ms) {}

    void add_pairs(const std::vector<IntervalPair>& pairs, const std::string& stratum = {});
    void add_duration(double total_ms, double detected_ms, const std::string& stratum = {});
    void merge(const EvalReport& report);
    EvalReport report() const;

private:
    struct Totals {
        double sum_abs = 0.0;
        std::size_t correct = 0;
        std::size_t incorrect = 0;
        double detected_ms = 0.0;
        double total_ms = 0.0;
    };
    static EvalReport finish(const Totals& t);
    static void fold(Totals& t, const EvalReport& r);

    double threshold_ms_;
    Totals total_;
    std::map<std::string, Totals> strata_;
};

/// Stratum label for each epoch of the reference: "<A|B|C>/<low|high>".
struct EpochStratum {
    TimeRange range;
    std::string label;
};

/// Evaluates one recording; `strata` may be empty.
EvalReport evaluate(const BeatAnnotation& reference, const BeatAnnotation& detected,
                    const std::vector<TimeRange>& reported, double d_total_ms,
                    const std::vector<EpochStratum>& strata = {}, double threshold_ms = 30.0);

nlohmann::json report_to_json(const EvalReport& report);

}  // namespace bcg
