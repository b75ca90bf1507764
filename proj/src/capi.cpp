#include <cchsh/cchsh.h>

#include <exception>
#include <string>

#include "config.hpp"
#include "runner.hpp"
#include "sweep.hpp"

struct cchsh_session {
  cchsh::Config config;
  bool config_loaded = false;

  cchsh::RunResult result;
  bool has_result = false;

  std::string err_message;
  std::string err_field;
  std::string err_name;
  std::string err_payload;
};

namespace {

void clear_error(cchsh_session* s) {
  s->err_message.clear();
  s->err_field.clear();
  s->err_name.clear();
  s->err_payload.clear();
}

cchsh_status capture(cchsh_session* s, const cchsh::Error& e) {
  s->err_message = e.what();
  s->err_field = e.field();
  s->err_name = cchsh::error_name(e.code());
  s->err_payload = cchsh::error_json(e);
  return static_cast<cchsh_status>(cchsh::exit_code_for(e.code()));
}

template <typename Fn>
cchsh_status guarded(cchsh_session* s, Fn&& fn) {
  if (!s) return CCHSH_ERR_INTERNAL;
  try {
    fn();
    clear_error(s);
    return CCHSH_OK;
  } catch (const cchsh::Error& e) {
    return capture(s, e);
  } catch (const std::exception& e) {
    return capture(s, cchsh::Error(cchsh::ErrorCode::Internal, e.what()));
  } catch (...) {
    return capture(s, cchsh::Error(cchsh::ErrorCode::Internal, "unknown failure"));
  }
}

const char* text_or_empty(const cchsh_session* s, const std::string cchsh_session::* member) {
  return s ? (s->*member).c_str() : "";
}

}  // namespace

extern "C" {

const char* cchsh_version(void) { return cchsh::kCodeVersion; }

cchsh_session* cchsh_session_new(void) {
  try {
    return new cchsh_session();
  } catch (...) {
    return nullptr;
  }
}

void cchsh_session_free(cchsh_session* session) { delete session; }

cchsh_status cchsh_load_config_file(cchsh_session* session, const char* path) {
  return guarded(session, [&] {
    if (!path) throw cchsh::Error(cchsh::ErrorCode::ConfigError, "config path is null");
    session->config = cchsh::load_config(path);
    session->config_loaded = true;
    session->has_result = false;
  });
}

cchsh_status cchsh_load_config_text(cchsh_session* session, const char* text,
                                    const char* base_dir) {
  return guarded(session, [&] {
    if (!text) throw cchsh::Error(cchsh::ErrorCode::ConfigError, "config text is null");
    session->config = cchsh::parse_config(text, base_dir ? base_dir : ".");
    session->config_loaded = true;
    session->has_result = false;
  });
}

cchsh_status cchsh_set_seed(cchsh_session* session, uint64_t seed) {
  return guarded(session, [&] {
    if (!session->config_loaded) {
      throw cchsh::Error(cchsh::ErrorCode::ConfigError, "no config loaded");
    }
    session->config.seed = seed;
  });
}

cchsh_status cchsh_set_threads(cchsh_session* session, int threads) {
  return guarded(session, [&] {
    if (!session->config_loaded) {
      throw cchsh::Error(cchsh::ErrorCode::ConfigError, "no config loaded");
    }
    if (threads < 1) {
      throw cchsh::Error(cchsh::ErrorCode::ConfigError, "thread count must be at least one",
                         "threads");
    }
    session->config.threads = threads;
  });
}

cchsh_status cchsh_set_nodes(cchsh_session* session, int nodes) {
  return guarded(session, [&] {
    if (!session->config_loaded) {
      throw cchsh::Error(cchsh::ErrorCode::ConfigError, "no config loaded");
    }
    if (nodes < 8) {
      throw cchsh::Error(cchsh::ErrorCode::ConfigError, "need at least 8 quadrature nodes",
                         "dynamics.nodes");
    }
    session->config.dynamics.nodes = nodes;
  });
}

cchsh_status cchsh_run(cchsh_session* session, const char* command) {
  return guarded(session, [&] {
    if (!session->config_loaded) {
      throw cchsh::Error(cchsh::ErrorCode::ConfigError, "no config loaded");
    }
    if (!command) throw cchsh::Error(cchsh::ErrorCode::ConfigError, "command is null");
    session->has_result = false;
    session->result = cchsh::run_command(session->config, command);
    session->has_result = true;
  });
}

const char* cchsh_report_json(const cchsh_session* session) {
  return session && session->has_result ? session->result.report_json.c_str() : "";
}

const char* cchsh_summary(const cchsh_session* session) {
  return session && session->has_result ? session->result.summary.c_str() : "";
}

int cchsh_table_count(const cchsh_session* session) {
  return session && session->has_result ? static_cast<int>(session->result.tables.size()) : 0;
}

const char* cchsh_table_name(const cchsh_session* session, int index) {
  if (!session || !session->has_result || index < 0 ||
      index >= static_cast<int>(session->result.tables.size())) {
    return "";
  }
  return session->result.tables[index].first.c_str();
}

const char* cchsh_table_csv(const cchsh_session* session, int index) {
  if (!session || !session->has_result || index < 0 ||
      index >= static_cast<int>(session->result.tables.size())) {
    return "";
  }
  return session->result.tables[index].second.c_str();
}

cchsh_status cchsh_write_outputs(cchsh_session* session, const char* directory) {
  return guarded(session, [&] {
    if (!session->has_result) {
      throw cchsh::Error(cchsh::ErrorCode::ConfigError, "no result to write; run first");
    }
    if (!directory) throw cchsh::Error(cchsh::ErrorCode::ConfigError, "directory is null");
    cchsh::write_outputs(session->result, directory, session->config.output.json,
                         session->config.output.csv);
  });
}

const char* cchsh_output_directory(const cchsh_session* session) {
  return session && session->config_loaded ? session->config.output.directory.c_str() : "out";
}

const char* cchsh_error_message(const cchsh_session* session) {
  return text_or_empty(session, &cchsh_session::err_message);
}

const char* cchsh_error_field(const cchsh_session* session) {
  return text_or_empty(session, &cchsh_session::err_field);
}

const char* cchsh_error_name(const cchsh_session* session) {
  return text_or_empty(session, &cchsh_session::err_name);
}

const char* cchsh_error_payload(const cchsh_session* session) {
  return text_or_empty(session, &cchsh_session::err_payload);
}

}  // extern "C"
