#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "semgap/sim.hpp"

namespace semgap {

enum class GapVerdict { Closed, Open, Unknown };
enum class ReflectingPhase { Absent, Mandatory };
enum class SdcDetection { None, ReflectionMismatch };
enum class OrderingQuirk {
  None,
  UioFabricDelivery,        // completions acknowledge fabric delivery only
  SignalContextVisibility,  // visibility established by same-context signals
  SingleFlitOnly,           // atomicity holds within one flit, unspecified past it
};

const char* gap_verdict_name(GapVerdict v);
const char* reflecting_phase_name(ReflectingPhase r);
const char* sdc_detection_name(SdcDetection d);
const char* ordering_quirk_name(OrderingQuirk q);

// Largest indivisibly-updated unit: a byte range, or the whole transaction.
struct AtomicityBoundary {
  bool transaction = false;
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;

  static AtomicityBoundary bytes(std::uint32_t lo, std::uint32_t hi = 0) {
    return AtomicityBoundary{false, lo, hi == 0 ? lo : hi};
  }
  static AtomicityBoundary whole_transaction() {
    return AtomicityBoundary{true, 0, 0};
  }
  bool operator==(const AtomicityBoundary&) const = default;
  std::string to_string() const;
};

struct InterconnectProfile {
  std::string name;
  AtomicityBoundary boundary;
  GapVerdict closes_visibility_gap = GapVerdict::Open;
  GapVerdict closes_semantic_gap = GapVerdict::Open;
  ReflectingPhase reflecting = ReflectingPhase::Absent;
  SdcDetection sdc_detection = SdcDetection::None;
  OrderingQuirk quirk = OrderingQuirk::None;
};

// The five built-in rows: rdma, cxl, nvlink, ualink, oae.
std::array<InterconnectProfile, 5> builtin_profiles();
const InterconnectProfile& profile_by_name(const std::string& name);

// Whether a single update of `object_bytes` can expose a mixed old/new state
// under the profile's atomicity boundary. Byte ranges use the lower bound.
bool torn_exposure(const InterconnectProfile& profile,
                   std::size_t object_bytes);

enum class GapRunKind { VisibilityDelay, TornWrite, Sdc };

struct GapRun {
  std::string profile;
  GapRunKind kind = GapRunKind::VisibilityDelay;
};

struct ScenarioSuite {
  std::uint64_t seed = 1;
  // UALink visibility in simulation comes from this assumption; the matrix
  // cell stays Unknown either way and reports flag the assumption.
  bool ualink_assume_visible_at_completion = true;
  std::vector<GapRun> runs;
};

ScenarioSuite default_gap_suite(std::uint64_t seed = 1);

struct GapMatrixRow {
  std::string profile;
  GapVerdict visibility = GapVerdict::Open;
  GapVerdict semantic = GapVerdict::Open;
  AtomicityBoundary boundary;
  ReflectingPhase reflecting = ReflectingPhase::Absent;
  SdcDetection sdc_detection = SdcDetection::None;
  bool visibility_assumed = false;  // verdict rests on a flagged assumption
  // Raw evidence, for reports.
  bool torn_exposed = false;
  std::uint64_t sdc_injected = 0;
  std::uint64_t sdc_detected = 0;
};

struct GapMatrix {
  std::vector<GapMatrixRow> rows;
};

// Reruns the suite through the engine and derives every verdict from the
// observed timelines. Throws ScenarioSuiteIncomplete unless each profile has
// a visibility-delay, a torn-write, and an SDC run.
GapMatrix simulate_gap_matrix(const ScenarioSuite& suite);

// Cell-for-cell comparison against builtin_profiles(). Returns mismatch
// descriptions; empty means exact agreement.
std::vector<std::string> matrix_mismatches(const GapMatrix& matrix);

// Aligned text table of the matrix next to the built-in expectation.
std::string render_gap_table(const GapMatrix& matrix);

}  // namespace semgap
