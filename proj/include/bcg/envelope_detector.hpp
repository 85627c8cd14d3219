#pragma once

#include "bcg/signal.hpp"

namespace bcg {

/// Energy-envelope peak picker: squares the band-passed trace, smooths it
/// with a centred 150 ms moving average and keeps local maxima above
/// 0.4 x (3 x rolling 10 s median), at least 333 ms apart. The constants
/// are fixed on purpose.
BeatAnnotation envelope_detect(const SignalTrace& trace);

}  // namespace bcg
