// Copyright 2026 The kvedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "kvedit/edit.hpp"
#include "kvedit/io.hpp"
#include "kvedit/metrics.hpp"
#include "kvedit/probe.hpp"
#include "kvedit/prominence.hpp"

namespace kvedit {

// JSON forms of the analysis reports. The readers throw ErrorKind::missing_data
// listing every absent field at once.

Json to_json(const VitalityReport& r);
VitalityReport vitality_from_json(const Json& j);

Json to_json(const ProminenceReport& r);
ProminenceReport prominence_from_json(const Json& j);

Json to_json(const MetricReport& r);
MetricReport metrics_from_json(const Json& j);

Json to_json(const DeltaTokens& d);
/// Mask summary; the bits themselves go to a TensorFile.
Json to_json(const EditMask& m);

Json to_json(const std::vector<ProbeFailure>& failures);

/// [F, H, W] tensor of 0/1 values.
Tensor mask_tensor(const EditMask& m);
/// [F, H, W] tensor of the raw accumulated map.
Tensor map_tensor(const GridMap& m);
GridMap map_from_tensor(const Tensor& t);

}  // namespace kvedit
