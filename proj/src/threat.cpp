#include "advlab/threat.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace advlab::threat {

const char* norm_name(Norm p) {
  switch (p) {
    case Norm::Linf: return "linf";
    case Norm::L2: return "l2";
    case Norm::L1: return "l1";
  }
  return "?";
}

namespace {

double parse_number(const std::string& s) {
  // plain decimal or a/b fraction
  auto slash = s.find('/');
  std::size_t used = 0;
  if (slash == std::string::npos) {
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  }
  std::string num = s.substr(0, slash), den = s.substr(slash + 1);
  double a = std::stod(num, &used);
  if (used != num.size()) throw std::invalid_argument("bad numerator");
  double b = std::stod(den, &used);
  if (used != den.size()) throw std::invalid_argument("bad denominator");
  if (b == 0.0) throw std::invalid_argument("zero denominator");
  return a / b;
}

}  // namespace

ThreatModel parse_threat(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("threat model '" + text +
                                "': expected <norm>:<epsilon>, e.g. linf:4/255");
  std::string norm = text.substr(0, colon);
  std::string value = text.substr(colon + 1);
  ThreatModel tm;
  if (norm == "linf")
    tm.p = Norm::Linf;
  else if (norm == "l2")
    tm.p = Norm::L2;
  else if (norm == "l1")
    tm.p = Norm::L1;
  else
    throw std::invalid_argument("threat model '" + text + "': unknown norm '" +
                                norm + "' (use linf, l2 or l1)");
  try {
    tm.epsilon = parse_number(value);
  } catch (const std::exception& e) {
    throw std::invalid_argument("threat model '" + text + "': bad epsilon '" +
                                value + "' (" + e.what() + ")");
  }
  if (!std::isfinite(tm.epsilon) || tm.epsilon < 0.0)
    throw std::invalid_argument("threat model '" + text +
                                "': epsilon must be finite and >= 0");
  return tm;
}

std::string format_threat(const ThreatModel& tm) {
  std::ostringstream os;
  os << norm_name(tm.p) << ":" << tm.epsilon;
  return os.str();
}

}  // namespace advlab::threat
