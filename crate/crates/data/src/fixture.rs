//! Local fixture server speaking the playlist-API shape the fetcher expects,
//! used by the tests and the acceptance suite. Plain std TCP, one thread per
//! connection, any bearer token accepted.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

/// One playlist entry as served to the client.
#[derive(Debug, Clone)]
pub enum FixtureTrack {
    /// `"track": null`
    NullTrack,
    /// track present, `"album": null`
    NullAlbum,
    /// real album with `images` URL entries
    Album { id: String, images: usize },
}

#[derive(Debug, Clone, Default)]
pub struct FixtureSpec {
    pub playlists: BTreeMap<String, Vec<FixtureTrack>>,
    pub images: BTreeMap<String, Vec<u8>>,
    pub page_size: usize,
}

impl FixtureSpec {
    /// The bundled deterministic fixture: playlist `mainlist` paginates over
    /// 120 items resolving to 100 unique albums (alb000..alb099) with
    /// duplicates, null tracks, null albums and too-few-image entries mixed
    /// in; playlist `second` holds 3 tracks from 2 albums. Solid-colour PNG
    /// bytes back the first ten album covers plus `second`'s two.
    pub fn bundled() -> FixtureSpec {
        let mut playlists = BTreeMap::new();
        let mut main = Vec::new();
        for i in 0..100 {
            main.push(FixtureTrack::Album {
                id: format!("alb{i:03}"),
                images: 3,
            });
        }
        for i in 0..10 {
            // duplicate tracks from already-seen albums
            main.push(FixtureTrack::Album {
                id: format!("alb{i:03}"),
                images: 3,
            });
        }
        for _ in 0..3 {
            main.push(FixtureTrack::NullTrack);
        }
        for _ in 0..3 {
            main.push(FixtureTrack::NullAlbum);
        }
        for i in 0..4 {
            main.push(FixtureTrack::Album {
                id: format!("skip{i}"),
                images: 1,
            });
        }
        playlists.insert("mainlist".to_string(), main);
        playlists.insert(
            "second".to_string(),
            vec![
                FixtureTrack::Album {
                    id: "alb100".into(),
                    images: 2,
                },
                FixtureTrack::Album {
                    id: "alb101".into(),
                    images: 2,
                },
                FixtureTrack::Album {
                    id: "alb100".into(),
                    images: 2,
                },
            ],
        );

        let mut images = BTreeMap::new();
        let mut add_png = |id: &str, seed: u8| {
            let img = image::RgbImage::from_pixel(
                8,
                8,
                image::Rgb([seed.wrapping_mul(23), seed.wrapping_mul(57), seed.wrapping_mul(91)]),
            );
            let mut bytes = Vec::new();
            img.write_to(
                &mut std::io::Cursor::new(&mut bytes),
                image::ImageFormat::Png,
            )
            .expect("png encode");
            images.insert(format!("{id}-1.png"), bytes);
        };
        for i in 0..10u8 {
            add_png(&format!("alb{i:03}"), i + 1);
        }
        add_png("alb100", 101);
        add_png("alb101", 103);

        FixtureSpec {
            playlists,
            images,
            page_size: 50,
        }
    }

    /// Number of unique albums `mainlist` should dedupe to.
    pub fn expected_main_albums(&self) -> usize {
        100
    }
}

pub struct FixtureServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl FixtureServer {
    /// Binds 127.0.0.1 on an ephemeral port and serves `spec` until dropped.
    pub fn start(spec: FixtureSpec) -> std::io::Result<FixtureServer> {
        let listener = TcpListener::bind(("127.0.0.1", 0))?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let spec = Arc::new(spec);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let spec = Arc::clone(&spec);
                let base = format!("http://{addr}");
                std::thread::spawn(move || {
                    let _ = handle_connection(stream, &spec, &base);
                });
            }
        });
        Ok(FixtureServer {
            addr,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // unblock the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, spec: &FixtureSpec, base: &str) -> std::io::Result<()> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    loop {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            break;
        }
        buf.extend_from_slice(&chunk[..n]);
        if buf.windows(4).any(|w| w == b"\r\n\r\n") || buf.len() > 16 * 1024 {
            break;
        }
    }
    let request = String::from_utf8_lossy(&buf);
    let Some(line) = request.lines().next() else {
        return Ok(());
    };
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or("");
    let target = parts.next().unwrap_or("");
    if method != "GET" {
        return respond(&mut stream, 405, "text/plain", b"method not allowed");
    }
    let (path, query) = match target.split_once('?') {
        Some((p, q)) => (p, Some(q)),
        None => (target, None),
    };

    if let Some(rest) = path.strip_prefix("/playlists/") {
        if let Some(pid) = rest.strip_suffix("/items") {
            let Some(tracks) = spec.playlists.get(pid) else {
                return respond(&mut stream, 404, "text/plain", b"unknown playlist");
            };
            let offset: usize = query
                .and_then(|q| {
                    q.split('&')
                        .find_map(|kv| kv.strip_prefix("offset=").and_then(|v| v.parse().ok()))
                })
                .unwrap_or(0);
            let page_size = spec.page_size.max(1);
            let end = (offset + page_size).min(tracks.len());
            let items: Vec<serde_json::Value> = tracks[offset.min(tracks.len())..end]
                .iter()
                .map(|t| track_json(t, base))
                .collect();
            let next = if end < tracks.len() {
                serde_json::Value::String(format!("{base}/playlists/{pid}/items?offset={end}"))
            } else {
                serde_json::Value::Null
            };
            let body = serde_json::json!({ "items": items, "next": next }).to_string();
            return respond(&mut stream, 200, "application/json", body.as_bytes());
        }
    }
    if let Some(name) = path.strip_prefix("/images/") {
        if let Some(bytes) = spec.images.get(name) {
            return respond(&mut stream, 200, "image/png", bytes);
        }
        return respond(&mut stream, 404, "text/plain", b"no such image");
    }
    respond(&mut stream, 404, "text/plain", b"not found")
}

fn track_json(t: &FixtureTrack, base: &str) -> serde_json::Value {
    match t {
        FixtureTrack::NullTrack => serde_json::json!({ "track": null }),
        FixtureTrack::NullAlbum => serde_json::json!({ "track": { "album": null } }),
        FixtureTrack::Album { id, images } => {
            let urls: Vec<serde_json::Value> = (0..*images)
                .map(|i| serde_json::json!({ "url": format!("{base}/images/{id}-{i}.png") }))
                .collect();
            serde_json::json!({ "track": { "album": { "id": id, "images": urls } } })
        }
    }
}

fn respond(stream: &mut TcpStream, status: u16, ctype: &str, body: &[u8]) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        404 => "Not Found",
        405 => "Method Not Allowed",
        _ => "Error",
    };
    let head = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(body)?;
    stream.flush()
}
