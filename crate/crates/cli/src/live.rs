//! Live feed: a reader thread hands lines to the simulation through a bounded queue.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::mpsc::{sync_channel, RecvTimeoutError};
use std::time::{Duration, Instant};

use nwr_core::arc::ReflexNetwork;
use nwr_core::config::RunConfig;
use nwr_core::stream::{StreamMessage, StreamProcessor};

fn open(source: &str) -> io::Result<Box<dyn BufRead + Send>> {
    if source == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(TcpStream::connect(source)?)))
    }
}

pub fn run(cfg: &RunConfig, net: ReflexNetwork, source: &str) -> io::Result<()> {
    let reader = open(source)?;
    let (tx, rx) = sync_channel::<io::Result<String>>(cfg.stream.queue_capacity.max(1));
    std::thread::spawn(move || {
        for line in reader.lines() {
            let failed = line.is_err();
            if tx.send(line).is_err() || failed {
                break;
            }
        }
    });

    let mut proc = StreamProcessor::new(net, cfg.sample_period_ms(), cfg.stream.heartbeat_s);
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let emit = |out: &mut io::BufWriter<io::StdoutLock>, msgs: &[StreamMessage]| -> io::Result<()> {
        for m in msgs {
            writeln!(out, "{}", m.to_json())?;
        }
        Ok(())
    };
    let timeout = Duration::from_millis(cfg.stream.stall_timeout_ms.max(1));
    let mut last = Instant::now();
    loop {
        match rx.recv_timeout(timeout) {
            Ok(Ok(line)) => {
                last = Instant::now();
                let msgs = proc.process_line(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
                emit(&mut out, &msgs)?;
                if !msgs.is_empty() {
                    out.flush()?;
                }
            }
            Ok(Err(e)) => return Err(e),
            Err(RecvTimeoutError::Timeout) => {
                emit(&mut out, &[proc.stall(last.elapsed().as_millis() as u64)])?;
                out.flush()?;
            }
            Err(RecvTimeoutError::Disconnected) => break,
        }
    }
    emit(&mut out, &[proc.summary()])?;
    out.flush()
}
