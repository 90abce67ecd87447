//! Playlist-API client: walks playlists, collects one cover URL per unique
//! album, and downloads them with a bounded worker pool.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::Deserialize;

use crate::error::{DataError, Result};

/// Which playlists to fetch and where from. The token, when present, is sent
/// as a bearer header; the fixture server accepts anything.
#[derive(Debug, Clone)]
pub struct PlaylistQuery {
    pub playlist_ids: Vec<String>,
    pub base_url: String,
    pub token: Option<String>,
}

impl PlaylistQuery {
    pub fn new(playlist_ids: Vec<String>, base_url: String, token: Option<String>) -> Result<PlaylistQuery> {
        if playlist_ids.is_empty() {
            return Err(DataError::InvalidInput("no playlist ids given".into()));
        }
        Ok(PlaylistQuery {
            playlist_ids,
            base_url,
            token,
        })
    }
}

#[derive(Debug, Deserialize)]
struct ItemsPage {
    items: Vec<Item>,
    next: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Item {
    track: Option<Track>,
}

#[derive(Debug, Deserialize)]
struct Track {
    album: Option<Album>,
}

#[derive(Debug, Deserialize)]
struct Album {
    id: String,
    #[serde(default)]
    images: Vec<Img>,
}

#[derive(Debug, Deserialize)]
struct Img {
    url: String,
}

/// Outcome of a fetch: unique album id -> cover URL, plus per-playlist
/// failures (the remaining playlists are still processed).
#[derive(Debug, Default)]
pub struct FetchOutcome {
    pub albums: BTreeMap<String, String>,
    pub errors: Vec<(String, String)>,
}

fn get_page(url: &str, token: Option<&str>) -> Result<ItemsPage> {
    let mut req = ureq::get(url);
    if let Some(t) = token {
        req = req.header("Authorization", &format!("Bearer {t}"));
    }
    let mut resp = req.call().map_err(|e| DataError::Http {
        url: url.to_string(),
        msg: e.to_string(),
    })?;
    let body = resp.body_mut().read_to_string().map_err(|e| DataError::Http {
        url: url.to_string(),
        msg: e.to_string(),
    })?;
    Ok(serde_json::from_str(&body)?)
}

/// Collects album cover URLs from every playlist in the query. Within a
/// playlist, pages are followed until `next` is null. Tracks without an
/// album or with fewer than two images are skipped; the second image entry
/// is the one recorded, mirroring the ingestion scripts.
pub fn fetch_covers(query: &PlaylistQuery) -> Result<FetchOutcome> {
    if query.playlist_ids.is_empty() {
        return Err(DataError::InvalidInput("no playlist ids given".into()));
    }
    let mut out = FetchOutcome::default();
    for pid in &query.playlist_ids {
        let mut url = format!(
            "{}/playlists/{}/items",
            query.base_url.trim_end_matches('/'),
            pid
        );
        loop {
            let page = match get_page(&url, query.token.as_deref()) {
                Ok(p) => p,
                Err(e) => {
                    log::warn!("playlist {pid}: {e}; continuing to next playlist");
                    out.errors.push((pid.clone(), e.to_string()));
                    break;
                }
            };
            for item in page.items {
                let Some(track) = item.track else { continue };
                let Some(album) = track.album else { continue };
                if album.images.len() < 2 {
                    continue;
                }
                out.albums.insert(album.id, album.images[1].url.clone());
            }
            match page.next {
                Some(next) => url = next,
                None => break,
            }
        }
    }
    Ok(out)
}

fn extension_of(url: &str) -> &str {
    url.rsplit('/')
        .next()
        .and_then(|name| name.rsplit_once('.'))
        .map(|(_, ext)| ext)
        .filter(|e| e.len() <= 4 && !e.is_empty())
        .unwrap_or("jpg")
}

/// Downloads every URL into `dest` as `<album_id>.<ext>` using up to
/// `parallelism` worker threads. Failures are retried once, then logged;
/// the function still succeeds and returns the number actually written.
pub fn download_all(
    urls: &BTreeMap<String, String>,
    dest: &Path,
    parallelism: usize,
) -> Result<usize> {
    std::fs::create_dir_all(dest)?;
    let queue: Arc<Mutex<Vec<(String, String)>>> = Arc::new(Mutex::new(
        urls.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
    ));
    let downloaded = Arc::new(Mutex::new(0usize));
    let workers = parallelism.max(1).min(urls.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let queue = Arc::clone(&queue);
            let downloaded = Arc::clone(&downloaded);
            let dest = dest.to_path_buf();
            scope.spawn(move || loop {
                let job = queue.lock().unwrap().pop();
                let Some((id, url)) = job else { break };
                let mut ok = false;
                for attempt in 0..2 {
                    match fetch_bytes(&url) {
                        Ok(bytes) => {
                            let path = dest.join(format!("{id}.{}", extension_of(&url)));
                            match std::fs::File::create(&path).and_then(|mut f| f.write_all(&bytes)) {
                                Ok(()) => {
                                    ok = true;
                                }
                                Err(e) => log::warn!("write {id}: {e}"),
                            }
                            break;
                        }
                        Err(e) if attempt == 0 => {
                            log::warn!("retrying {url}: {e}");
                        }
                        Err(e) => log::warn!("giving up on {url}: {e}"),
                    }
                }
                if ok {
                    *downloaded.lock().unwrap() += 1;
                }
            });
        }
    });
    let n = *downloaded.lock().unwrap();
    Ok(n)
}

fn fetch_bytes(url: &str) -> Result<Vec<u8>> {
    let mut resp = ureq::get(url).call().map_err(|e| DataError::Http {
        url: url.to_string(),
        msg: e.to_string(),
    })?;
    resp.body_mut().read_to_vec().map_err(|e| DataError::Http {
        url: url.to_string(),
        msg: e.to_string(),
    })
}
