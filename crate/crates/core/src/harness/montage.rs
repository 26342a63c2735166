//! Qualitative comparison grids: one row per image name, one column per
//! method, 2-px separators. Labels go to a plain-text sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use super::{images_by_stem, HarnessError};
use crate::image::{load_image, modcrop, store_image, to_luminance, BitDepth, Image, PixelFormat};

/// Separator width between cells, in pixels.
pub const SEPARATOR: usize = 2;
/// Separator intensity.
pub const SEPARATOR_VALUE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MontageColumn {
    pub label: String,
    pub dir: PathBuf,
}

impl MontageColumn {
    pub fn new(label: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        Self {
            label: label.into(),
            dir: dir.into(),
        }
    }
}

/// Brings one row of cells to common dims. Every cell is modcropped by
/// `scale`; a cell whose dims times `scale` equal the row maximum is treated
/// as LR and nearest-upscaled.
fn align_row(name: &str, cells: Vec<Image>, scale: usize) -> Result<Vec<Image>, HarnessError> {
    let channels_differ = cells.windows(2).any(|w| w[0].channels() != w[1].channels());
    let mut cells = cells
        .into_iter()
        .map(|c| {
            let c = if channels_differ {
                to_luminance(&c)?
            } else {
                c
            };
            Ok(modcrop(&c, scale)?)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let th = cells.iter().map(Image::height).max().unwrap_or(0);
    let tw = cells.iter().map(Image::width).max().unwrap_or(0);
    for c in cells.iter_mut() {
        if scale > 1 && c.height() * scale == th && c.width() * scale == tw {
            *c = c.replicate(scale);
        }
        if (c.height(), c.width()) != (th, tw) {
            return Err(HarnessError::Montage(format!(
                "`{name}`: cell is {}x{}, row needs {th}x{tw}",
                c.height(),
                c.width()
            )));
        }
    }
    Ok(cells)
}

/// Lays out rows of equally sized cells; rows may differ in size, unused
/// canvas is 0.
pub fn compose_grid(rows: &[Vec<Image>]) -> Result<Image, HarnessError> {
    if rows.is_empty() || rows.iter().any(|r| r.is_empty()) {
        return Err(HarnessError::Montage(
            "montage needs at least one row and column".into(),
        ));
    }
    let channels = rows[0][0].channels();
    if rows.iter().flatten().any(|c| c.channels() != channels) {
        return Err(HarnessError::Montage("rows differ in channel count".into()));
    }
    let row_w = |r: &Vec<Image>| r.len() * r[0].width() + (r.len() - 1) * SEPARATOR;
    let width = rows.iter().map(row_w).max().unwrap_or(0);
    let height = rows.iter().map(|r| r[0].height()).sum::<usize>() + (rows.len() - 1) * SEPARATOR;

    let mut canvas = Image::filled(height, width, channels, 0.0);
    let mut y0 = 0;
    for (ri, row) in rows.iter().enumerate() {
        let h = row[0].height();
        if ri > 0 {
            for c in 0..channels {
                for y in y0 - SEPARATOR..y0 {
                    for x in 0..width {
                        canvas.set(c, y, x, SEPARATOR_VALUE);
                    }
                }
            }
        }
        let mut x0 = 0;
        for (ci, cell) in row.iter().enumerate() {
            let w = cell.width();
            if ci > 0 {
                for c in 0..channels {
                    for y in y0..y0 + h {
                        for x in x0 - SEPARATOR..x0 {
                            canvas.set(c, y, x, SEPARATOR_VALUE);
                        }
                    }
                }
            }
            for c in 0..channels {
                for y in 0..h {
                    for x in 0..w {
                        canvas.set(c, y0 + y, x0 + x, cell.get(c, y, x));
                    }
                }
            }
            x0 += w + SEPARATOR;
        }
        y0 += h + SEPARATOR;
    }
    Ok(canvas)
}

/// Sidecar path for a montage output: `<out>.labels.txt`.
pub fn labels_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".labels.txt");
    PathBuf::from(s)
}

/// Builds the grid, writes it as an 8-bit image and writes the label
/// sidecar. Returns the image path.
pub fn montage(
    columns: &[MontageColumn],
    names: &[String],
    out: &Path,
    scale: usize,
) -> Result<PathBuf, HarnessError> {
    if columns.is_empty() || names.is_empty() {
        return Err(HarnessError::Montage(
            "montage needs at least one column and one name".into(),
        ));
    }
    if scale == 0 {
        return Err(HarnessError::Montage("scale must be >= 1".into()));
    }
    let indexes = columns
        .iter()
        .map(|c| images_by_stem(&c.dir))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(names.len());
    for name in names {
        let mut cells = Vec::with_capacity(columns.len());
        for (col, index) in columns.iter().zip(&indexes) {
            let path = index.get(name).ok_or_else(|| {
                HarnessError::Montage(format!(
                    "column `{}`: no image `{name}` in {}",
                    col.label,
                    col.dir.display()
                ))
            })?;
            cells.push(load_image(path)?);
        }
        rows.push(align_row(name, cells, scale)?);
    }
    let grid = compose_grid(&rows)?;
    store_image(&grid, out, PixelFormat::for_image(&grid, BitDepth::Eight))?;

    let mut text = String::from("columns:");
    for c in columns {
        text.push(' ');
        text.push_str(&c.label);
    }
    text.push_str("\nrows:");
    for n in names {
        text.push(' ');
        text.push_str(n);
    }
    text.push('\n');
    let sidecar = labels_path(out);
    fs::write(&sidecar, text).map_err(|source| HarnessError::Io {
        path: sidecar,
        source,
    })?;
    Ok(out.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_columns_of_8x8() {
        let a = Image::filled(8, 8, 1, 0.2);
        let g = compose_grid(&[vec![a.clone(), a]]).unwrap();
        assert_eq!((g.height(), g.width()), (8, 18));
        assert_eq!(g.get(0, 3, 8), SEPARATOR_VALUE);
        assert_eq!(g.get(0, 3, 9), SEPARATOR_VALUE);
        assert_eq!(g.get(0, 3, 10), 0.2);
    }

    #[test]
    fn lr_column_is_upscaled() {
        let gt = Image::filled(16, 16, 1, 0.5);
        let lr = Image::from_fn(4, 4, 1, |_, y, x| (y * 4 + x) as f64 / 15.0);
        let row = align_row("x", vec![gt, lr.clone()], 4).unwrap();
        assert_eq!(row[1], lr.replicate(4));
        assert!(align_row(
            "x",
            vec![Image::filled(16, 16, 1, 0.0), Image::filled(12, 16, 1, 0.0)],
            4
        )
        .is_err());
    }

    #[test]
    fn writes_grid_and_sidecar() {
        let root = tempfile::tempdir().unwrap();
        let mut cols = Vec::new();
        for label in ["gt", "a", "b", "c", "d"] {
            let d = root.path().join(label);
            fs::create_dir(&d).unwrap();
            for n in ["p", "q", "r"] {
                let img = Image::filled(8, 8, 1, 0.5);
                store_image(
                    &img,
                    d.join(format!("{n}.png")),
                    PixelFormat::for_image(&img, BitDepth::Eight),
                )
                .unwrap();
            }
            cols.push(MontageColumn::new(label, d));
        }
        let names: Vec<String> = ["p", "q", "r"].iter().map(|s| s.to_string()).collect();
        let out = root.path().join("grid.png");
        montage(&cols, &names, &out, 4).unwrap();
        let g = load_image(&out).unwrap();
        assert_eq!((g.height(), g.width()), (3 * 8 + 2 * 2, 5 * 8 + 4 * 2));
        let labels = fs::read_to_string(labels_path(&out)).unwrap();
        assert!(labels.contains("gt a b c d"));
        let missing = vec!["zz".to_string()];
        assert!(montage(&cols, &missing, &out, 4).is_err());
    }
}
