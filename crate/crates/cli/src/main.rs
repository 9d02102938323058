// SPDX-License-Identifier: Apache-2.0

use std::io::Write;

fn main() {
    // Diagnostics go to stderr as JSON lines, like errors.
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, record| {
            let line = serde_json::json!({"level": record.level().as_str(), "message": record.args().to_string()});
            writeln!(buf, "{line}")
        })
        .init();
    std::process::exit(cvechain_cli::cli_main(std::env::args_os()));
}
