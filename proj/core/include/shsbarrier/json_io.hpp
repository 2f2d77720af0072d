#pragma once

#include <json.hpp>

#include "shsbarrier/certificate.hpp"
#include "shsbarrier/dfa.hpp"
#include "shsbarrier/model.hpp"
#include "shsbarrier/poly.hpp"
#include "shsbarrier/sim.hpp"

namespace shs {

using Json = nlohmann::json;

Json to_json(const Polynomial& p);
Polynomial poly_from_json(const Json& j);

Json to_json(const ScalarGainFunction& g);
ScalarGainFunction gain_from_json(const Json& j);

Json to_json(const Box& b);
Box box_from_json(const Json& j);

Json to_json(const Region& r);
Region region_from_json(const Json& j);

/// Network schema: either an explicit subsystem list or a homogeneous
/// template expanded `count` times with all-to-all coupling. Template drift
/// polynomials may reference the pseudo-variable "wsum", which expands to
/// the sum of all internal input coordinates.
Network network_from_json(const Json& j);
Json to_json(const Network& net);

Dfa dfa_from_json(const Json& j);
Json to_json(const Dfa& d);

/// Labeling schema: per symbol either a list of full-dimension boxes or a
/// per-subsystem box replicated across the composite state.
Labeling labeling_from_json(const Json& j, const Network& net);

PseudoCertificate certificate_from_json(const Json& j);
Json to_json(const PseudoCertificate& c);

Json to_json(const VerificationReport& r);
Json to_json(const ConditionReport& r);

Json to_json(const WilsonInterval& w);

/// Aggregate view of a simulation run (per-trajectory paths excluded).
Json to_json(const TraceReport& r);

}  // namespace shs
