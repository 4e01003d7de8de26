//! `smsim`: run simulation scenarios and poke at the wire codecs.
//!
//! Exit codes: 0 success, 1 scenario assertion failure, 2 configuration or
//! input error.

use clap::{Parser, Subcommand, ValueEnum};
use smsim::scenario::{list_scenarios, run_scenario, ScenarioConfig};
use smsim::sip_codec::{self, DeviceProfile};
use smsim::sms_codec::{self, SmsPdu};
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "smsim", version, about = "Deterministic SMS-over-IMS attack and defense simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario described by a JSON config file.
    Run {
        /// Path to the scenario config (JSON; `-` reads stdin).
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Include the full event log in text output.
        #[arg(long)]
        verbose: bool,
    },
    /// List the scenario catalog.
    ListScenarios,
    /// Wire codec utilities.
    Codec {
        #[command(subcommand)]
        codec: CodecCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Subcommand)]
enum CodecCmd {
    /// Point-to-point SMS transport layer.
    Sms {
        #[command(subcommand)]
        op: SmsOp,
    },
    /// SIP message framing.
    Sip {
        #[command(subcommand)]
        op: SipOp,
    },
}

#[derive(Subcommand)]
enum SmsOp {
    /// JSON message description (file or stdin) -> lowercase hex.
    Encode {
        /// Read the JSON description from this file instead of stdin.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Lowercase hex -> JSON message description.
    Decode { hex: String },
}

#[derive(Subcommand)]
enum SipOp {
    /// Build a MESSAGE request carrying a hex-encoded body.
    BuildMessage {
        /// Sender identity placed in From and P-Preferred-Identity.
        #[arg(long)]
        from: String,
        #[arg(long)]
        recipient: String,
        /// Message body as lowercase hex (typically an encoded SMS).
        #[arg(long, default_value = "")]
        body_hex: String,
        #[arg(long, default_value = "2001:db8:d::1")]
        device_address: String,
        #[arg(long, default_value = "2001:db8:c0::1")]
        ims_address: String,
        #[arg(long, default_value = "vzims.com")]
        phone_context: String,
    },
    /// Parse a SIP message (file or stdin) into a JSON summary.
    Parse {
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

/// Errors that indicate bad input or configuration, not a failed run.
fn config_err(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn read_input(path: Option<&PathBuf>) -> Result<String, String> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))
        }
        _ => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| format!("stdin: {e}"))?;
            Ok(buf)
        }
    }
}

fn read_input_bytes(path: Option<&PathBuf>) -> Result<Vec<u8>, String> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
        }
        _ => {
            let mut buf = Vec::new();
            std::io::stdin()
                .read_to_end(&mut buf)
                .map_err(|e| format!("stdin: {e}"))?;
            Ok(buf)
        }
    }
}

fn cmd_run(config: PathBuf, out: Option<PathBuf>, format: Format, verbose: bool) -> ExitCode {
    let text = match read_input(Some(&config)) {
        Ok(t) => t,
        Err(e) => return config_err(e),
    };
    let cfg = match ScenarioConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return config_err(e),
    };
    let report = match run_scenario(&cfg) {
        Ok(r) => r,
        Err(e) => return config_err(e),
    };
    let rendered = match format {
        Format::Structured => report.to_json(),
        Format::Text => {
            let mut t = report.to_text();
            if verbose {
                t.push_str("\n[event log]\n");
                for line in &report.event_log {
                    t.push_str(line);
                    t.push('\n');
                }
            }
            t
        }
    };
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, rendered) {
                return config_err(format!("{}: {e}", path.display()));
            }
        }
        None => print!("{rendered}"),
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        eprintln!("scenario {} finished with failing verdicts", report.scenario);
        ExitCode::from(1)
    }
}

fn cmd_sms(op: SmsOp) -> ExitCode {
    match op {
        SmsOp::Encode { json } => {
            let text = match read_input(json.as_ref()) {
                Ok(t) => t,
                Err(e) => return config_err(e),
            };
            let pdu: SmsPdu = match serde_json::from_str(&text) {
                Ok(p) => p,
                Err(e) => return config_err(e),
            };
            match sms_codec::encode_pdu(&pdu) {
                Ok(bytes) => {
                    println!("{}", hex::encode(bytes));
                    ExitCode::SUCCESS
                }
                Err(e) => config_err(e),
            }
        }
        SmsOp::Decode { hex: hex_str } => {
            let bytes = match hex::decode(hex_str.trim()) {
                Ok(b) => b,
                Err(e) => return config_err(e),
            };
            match sms_codec::decode_pdu(&bytes) {
                Ok(pdu) => {
                    println!("{}", serde_json::to_string_pretty(&pdu).unwrap());
                    ExitCode::SUCCESS
                }
                Err(e) => config_err(e),
            }
        }
    }
}

fn cmd_sip(op: SipOp) -> ExitCode {
    match op {
        SipOp::BuildMessage { from, recipient, body_hex, device_address, ims_address, phone_context } => {
            let body = match hex::decode(body_hex.trim()) {
                Ok(b) => b,
                Err(e) => return config_err(e),
            };
            let mut profile = DeviceProfile::new(&from, &device_address, vec![]);
            profile.ims_server_address = ims_address;
            profile.phone_context = phone_context;
            match sip_codec::build_message_request(&mut profile, &from, &recipient, body) {
                Ok(env) => {
                    let bytes = sip_codec::serialize(&env);
                    match std::io::Write::write_all(&mut std::io::stdout(), &bytes) {
                        Ok(()) => ExitCode::SUCCESS,
                        Err(e) => config_err(e),
                    }
                }
                Err(e) => config_err(e),
            }
        }
        SipOp::Parse { file } => {
            let bytes = match read_input_bytes(file.as_ref()) {
                Ok(t) => t,
                Err(e) => return config_err(e),
            };
            match sip_codec::parse(&bytes) {
                Ok(env) => {
                    let summary = serde_json::json!({
                        "kind": match &env.kind {
                            sip_codec::SipKind::Request { method, uri } =>
                                serde_json::json!({"request": {"method": method, "uri": uri}}),
                            sip_codec::SipKind::Response { code, reason } =>
                                serde_json::json!({"response": {"code": code, "reason": reason}}),
                        },
                        "headers": env.headers,
                        "body_hex": hex::encode(&env.body),
                    });
                    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
                    ExitCode::SUCCESS
                }
                Err(e) => config_err(e),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, out, format, verbose } => cmd_run(config, out, format, verbose),
        Cmd::ListScenarios => {
            for (name, desc) in list_scenarios() {
                println!("{name:<22} {desc}");
            }
            ExitCode::SUCCESS
        }
        Cmd::Codec { codec } => match codec {
            CodecCmd::Sms { op } => cmd_sms(op),
            CodecCmd::Sip { op } => cmd_sip(op),
        },
    }
}
