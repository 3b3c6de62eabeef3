#include <doctest.h>

#include "mbpi/fixtures.hpp"
#include "mbpi/model_io.hpp"

using namespace mbpi;

namespace {

ErrorCode parse_code(const std::string& text) {
  try {
    validate(spec_from_json_text(text));
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("model accepted: " << text);
  return ErrorCode::MalformedInput;
}

}  // namespace

TEST_CASE("fixtures survive a JSON round trip") {
  for (const auto& name : fixture_names()) {
    const ModelSpec s = fixture_spec(name);
    const auto doc = spec_to_json(s);
    const ModelSpec back = spec_from_json(doc);
    CHECK(spec_to_json(back) == doc);
    CHECK_NOTHROW(validate(back));
  }
}

TEST_CASE("exit_rate defaults to conservative and is kept when given") {
  const std::string text = R"({"n":1,
    "immigration":{"entries":[{"j":[1],"rate":1.0}]},
    "resurrection":"absorbing",
    "branch":[{"entries":[{"j":[0],"rate":2.0},{"j":[2],"rate":1.0}],"exit_rate":3.5}]})";
  const auto m = validate(spec_from_json_text(text));
  CHECK(m.absorbing());
  CHECK(m.immigration_conservative());
  CHECK_FALSE(m.branch_conservative()[0]);
  CHECK(m.spec().branch[0].diagonal == -3.5);
  CHECK(spec_to_json(m.spec())["branch"][0]["exit_rate"] == 3.5);
  CHECK_FALSE(spec_to_json(m.spec())["immigration"].contains("exit_rate"));
}

TEST_CASE("custom resurrection object") {
  const std::string text = R"({"n":1,
    "immigration":{"entries":[{"j":[1],"rate":1.0}]},
    "resurrection":{"entries":[{"j":[2],"rate":0.5}]},
    "branch":[{"entries":[{"j":[0],"rate":2.0},{"j":[2],"rate":1.0}]}]})";
  const auto m = validate(spec_from_json_text(text));
  CHECK_FALSE(m.absorbing());
  CHECK_FALSE(m.resurrection_is_immigration());
  REQUIRE(m.resurrection_distribution() != nullptr);
  CHECK(m.resurrection_distribution()->entries.at(0).offset == MultiIndex{2});
}

TEST_CASE("malformed documents") {
  CHECK(parse_code("not json") == ErrorCode::MalformedInput);
  CHECK(parse_code("[]") == ErrorCode::MalformedInput);
  CHECK(parse_code(R"({"n":1})") == ErrorCode::MalformedInput);
  CHECK(parse_code(R"({"n":1,"immigration":{"entries":[{"j":[1],"rate":-1}]},
      "branch":[{"entries":[{"j":[0],"rate":1},{"j":[2],"rate":1}]}]})") == ErrorCode::NegativeRate);
  CHECK(parse_code(R"({"n":1,"immigration":{"entries":[{"j":[1,0],"rate":1}]},
      "branch":[{"entries":[{"j":[0],"rate":1},{"j":[2],"rate":1}]}]})") == ErrorCode::DimensionMismatch);
  CHECK(parse_code(R"({"n":1,"immigration":{"entries":[{"j":[1],"rate":1}]},"resurrection":"sometimes",
      "branch":[{"entries":[{"j":[0],"rate":1},{"j":[2],"rate":1}]}]})") == ErrorCode::MalformedInput);
  CHECK(parse_code(R"({"n":1,"immigration":{"entries":[{"j":[1],"rate":1}]},
      "branch":[{"entries":[{"j":[0],"rate":1},{"j":[2],"rate":1}],"exit_rate":1.5}]})") ==
        ErrorCode::DiagonalMismatch);
  CHECK(parse_code(R"({"n":1,"immigration":{"entries":[{"j":[1],"rate":1},{"j":[1],"rate":2}]},
      "branch":[{"entries":[{"j":[0],"rate":1},{"j":[2],"rate":1}]}]})") == ErrorCode::MalformedInput);
}

TEST_CASE("digest is stable and sensitive") {
  CHECK(digest_hex("") == "cbf29ce484222325");
  CHECK(digest_hex("a") == "af63dc4c8601ec8c");
  CHECK(digest_hex("model") != digest_hex("model "));
}
