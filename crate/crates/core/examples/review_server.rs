//! Serve the labeling API over a demo dataset.
//!
//! By default the example binds an ephemeral port, labels one triplet over
//! HTTP and exits. Pass `--serve [port]` to keep it running.
//!
//! ```bash
//! cargo run --example review_server
//! cargo run --example review_server -- --serve 8080
//! ```


use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

use stylecurate::datamodel::write_manifest;
use stylecurate::fixtures::{write_mini_dataset, MiniSpec};
use stylecurate::ingest::scan_dataset;
use stylecurate::review::{ReviewConfig, ReviewServer};
use stylecurate::triplets::{build_collected, content_map, read_assets, MatchConfig};

async fn request(addr: std::net::SocketAddr, method: &str, path: &str, body: &str) -> std::io::Result<String> {
    let mut stream = TcpStream::connect(addr).await?;
    let head = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).await?;
    stream.write_all(body.as_bytes()).await?;
    let mut raw = String::new();
    stream.read_to_string(&mut raw).await?;
    Ok(raw.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or(raw))
}

#[tokio::main]
async fn main() -> stylecurate::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let serve = args.first().map(String::as_str) == Some("--serve");
    let port = if serve {
        args.get(1).and_then(|p| p.parse().ok()).unwrap_or(8080)
    } else {
        0
    };

    let dir = tempfile::tempdir().expect("tempdir");
    let data = write_mini_dataset(dir.path(), &MiniSpec::default())?;
    let (catalog, _) = scan_dataset(&data.root, &data.clusters)?;
    let manifest = build_collected(&catalog, &content_map(&read_assets(&data.assets)?), &MatchConfig::default())?;
    let manifest_path = dir.path().join("collected.ndjson");
    write_manifest(&manifest_path, &manifest)?;

    let cfg = ReviewConfig::new(&manifest_path, &data.root, dir.path().join("labels.ndjson"), port);
    let server = ReviewServer::bind(&cfg).await?;
    let addr = server.local_addr()?;
    println!("review service on http://{addr}");
    if serve {
        return server.run().await;
    }

    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let handle = tokio::spawn(server.run_until(async {
        let _ = stop_rx.await;
    }));
    let io = |e: std::io::Error| stylecurate::Error::Io {
        path: "http".into(),
        source: e,
    };
    println!("batch: {}", request(addr, "GET", "/api/triplets?page_size=1", "").await.map_err(io)?);
    let body = format!(
        r#"{{"triplet_id":"{}","label":"high","curator":"demo"}}"#,
        manifest[0].triplet_id
    );
    println!("ack: {}", request(addr, "POST", "/api/labels", &body).await.map_err(io)?);
    println!("progress: {}", request(addr, "GET", "/api/progress", "").await.map_err(io)?);
    let _ = stop_tx.send(());
    handle.await.expect("server task")?;
    Ok(())
}
