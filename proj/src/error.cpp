#include "smo/error.hpp"

namespace smo {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::ConfigError: return "ConfigError";
    case Errc::UndeclaredRoute: return "UndeclaredRoute";
    case Errc::DuplicateComponent: return "DuplicateComponent";
    case Errc::ComponentDown: return "ComponentDown";
    case Errc::UnknownInterface: return "UnknownInterface";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::CollectionTimeout: return "CollectionTimeout";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::UnmappableField: return "UnmappableField";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::NonFiniteUpdate: return "NonFiniteUpdate";
    case Errc::EmptyTrainSet: return "EmptyTrainSet";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::EmptyEvalSet: return "EmptyEvalSet";
    case Errc::EmptySearchSpace: return "EmptySearchSpace";
    case Errc::InvalidArtifact: return "InvalidArtifact";
    case Errc::IllegalTransition: return "IllegalTransition";
    case Errc::RefinementBudgetExhausted: return "RefinementBudgetExhausted";
    case Errc::NoDataSources: return "NoDataSources";
    case Errc::InsufficientDomains: return "InsufficientDomains";
    case Errc::UnsupportedKind: return "UnsupportedKind";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::MissingKey: return "MissingKey";
    case Errc::SinglePointFailure: return "SinglePointFailure";
    case Errc::ZeroCapacity: return "ZeroCapacity";
  }
  return "Unknown";
}

namespace {
std::string compose(Errc code, const std::string& message, const std::string& field) {
  std::string out{to_string(code)};
  if (!field.empty()) out += " at " + field;
  out += ": " + message;
  return out;
}
}  // namespace

Error::Error(Errc code, const std::string& message, std::string field)
    : std::runtime_error(compose(code, message, field)), code_(code), field_(std::move(field)) {}

}  // namespace smo
