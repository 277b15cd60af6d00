import logging
import os
from datetime import datetime

from reportlab.lib import colors
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import (
    HRFlowable,
    PageBreak,
    Paragraph,
    SimpleDocTemplate,
    Spacer,
    Table,
    TableStyle,
)

from app.helpers.harness import compare_table
from app.models.experiment import ComparisonTable, RunReport, TableMode

logger = logging.getLogger(__name__)


def simple_sanitize(text):
    if text is None:
        return ""
    return str(text).encode("ascii", "replace").decode("ascii")


def _number(value, digits=4):
    return "-" if value is None else f"{value:.{digits}f}"


def _table_style(best_cells):
    commands = [
        ("BACKGROUND", (0, 0), (-1, 0), colors.lightgrey),
        ("TEXTCOLOR", (0, 0), (-1, 0), colors.darkblue),
        ("ALIGN", (0, 0), (-1, 0), "CENTER"),
        ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
        ("FONTSIZE", (0, 0), (-1, 0), 10),
        ("BOTTOMPADDING", (0, 0), (-1, 0), 8),
        ("ALIGN", (1, 1), (-1, -1), "RIGHT"),
        ("FONTNAME", (0, 1), (-1, -1), "Helvetica"),
        ("FONTSIZE", (0, 1), (-1, -1), 9),
        ("GRID", (0, 0), (-1, -1), 0.5, colors.grey),
        ("VALIGN", (0, 0), (-1, -1), "MIDDLE"),
        ("ROWBACKGROUNDS", (0, 1), (-1, -1), [colors.white, colors.whitesmoke]),
    ]
    # row-best values in bold
    for cell in best_cells:
        commands.append(("FONTNAME", cell, cell, "Helvetica-Bold"))
    return TableStyle(commands)


def _comparison_flowable(table: ComparisonTable) -> Table:
    data = [["dataset", *table.algorithms]]
    best_cells = []
    for r, row in enumerate(table.rows, start=1):
        data.append([row.dataset, *[_number(row.values.get(a)) for a in table.algorithms]])
        if row.best is not None:
            best_cells.append((1 + table.algorithms.index(row.best), r))
    flowable = Table(data)
    flowable.setStyle(_table_style(best_cells))
    return flowable


def _aggregate_flowable(report: RunReport, dataset: str) -> Table:
    data = [["algorithm", "mean", "std", "best cell", "best repeat", "repeat std", "invalid"]]
    for aggregate in report.aggregates:
        if aggregate.dataset != dataset:
            continue
        data.append(
            [
                aggregate.algorithm.value,
                _number(aggregate.mean),
                _number(aggregate.std),
                _number(aggregate.best_cell),
                _number(aggregate.best_repeat_mean),
                _number(aggregate.repeat_std),
                str(aggregate.invalid_cells),
            ]
        )
    flowable = Table(data)
    flowable.setStyle(_table_style([]))
    return flowable


def generate_report_pdf(report: RunReport, pdf_path: str, title: str = None):
    """Write the comparison tables and per-dataset aggregates of a run as a PDF."""
    doc = SimpleDocTemplate(
        pdf_path,
        pagesize=letter,
        rightMargin=0.85 * inch,
        leftMargin=0.85 * inch,
        topMargin=0.85 * inch,
        bottomMargin=0.85 * inch,
    )
    styles = getSampleStyleSheet()
    title_style = ParagraphStyle(
        "CustomTitle",
        parent=styles["Title"],
        fontSize=20,
        spaceAfter=24,
        alignment=1,
        textColor=colors.darkblue,
    )
    heading_style = ParagraphStyle(
        "CustomHeading1",
        parent=styles["Heading1"],
        fontSize=16,
        spaceBefore=16,
        spaceAfter=10,
        textColor=colors.darkblue,
    )
    normal_style = ParagraphStyle(
        "CustomNormal",
        parent=styles["Normal"],
        fontSize=11,
        spaceBefore=6,
        spaceAfter=8,
        leading=16,
    )
    date_style = ParagraphStyle(
        "DateStyle", parent=normal_style, alignment=2, fontSize=9, textColor=colors.gray
    )

    spec = report.spec
    content = [Spacer(1, 0.2 * inch)]
    content.append(Paragraph(simple_sanitize(title or spec.name or "AUC comparison"), title_style))
    content.append(
        Paragraph(f"Generated on: {datetime.now().strftime('%B %d, %Y')}", date_style)
    )
    content.append(
        HRFlowable(
            width="100%",
            thickness=1,
            lineCap="round",
            color=colors.lightgrey,
            spaceBefore=0.1 * inch,
            spaceAfter=0.3 * inch,
        )
    )
    content.append(
        Paragraph(
            f"{spec.repeats} x {spec.folds}-fold stratified cross validation, "
            f"master seed {spec.seed}. Bold marks the best algorithm per dataset.",
            normal_style,
        )
    )

    headings = {
        TableMode.mean: "Average AUC",
        TableMode.best: "Best fold AUC",
        TableMode.best_repeat: "Best repeat mean AUC",
    }
    for mode, heading in headings.items():
        table = compare_table(report, mode)
        content.append(Paragraph(heading, heading_style))
        if not table.algorithms:
            content.append(Paragraph("No valid cells", normal_style))
            continue
        content.append(_comparison_flowable(table))
        content.append(Spacer(1, 0.2 * inch))

    content.append(PageBreak())
    for record in report.datasets:
        summary = record.summary
        content.append(Paragraph(simple_sanitize(record.name), heading_style))
        content.append(
            Paragraph(
                f"{summary.num_instances} instances, {summary.num_features} features, "
                f"positive class {simple_sanitize(record.positive_label)}, "
                f"imbalance ratio {record.binary_imbalance_ratio:.2f}",
                normal_style,
            )
        )
        content.append(_aggregate_flowable(report, record.name))
        content.append(Spacer(1, 0.2 * inch))

    if report.observations:
        content.append(Paragraph("Observations", heading_style))
        for observation in report.observations:
            verdict = "holds" if observation.holds else "does not hold"
            content.append(
                Paragraph(
                    f"• {observation.name} on {simple_sanitize(observation.dataset)}: "
                    f"{verdict} ({simple_sanitize(observation.detail)})",
                    normal_style,
                )
            )

    def add_footer(canvas, doc):
        canvas.saveState()
        canvas.setStrokeColor(colors.lightgrey)
        canvas.line(doc.leftMargin, 0.5 * inch, doc.width + doc.leftMargin, 0.5 * inch)
        canvas.setFont("Helvetica-Oblique", 8)
        canvas.setFillColor(colors.grey)
        canvas.drawCentredString(
            doc.width / 2 + doc.leftMargin, 0.35 * inch, "Generated by CUSBoost Bench"
        )
        canvas.setFont("Helvetica", 8)
        canvas.drawRightString(doc.width + doc.leftMargin, 0.35 * inch, f"Page {doc.page}")
        canvas.restoreState()

    doc.build(content, onFirstPage=add_footer, onLaterPages=add_footer)
    logger.info("Wrote report PDF to %s", pdf_path)


def cleanup_temp_file(file_path: str):
    """Remove a temporary file after it has been sent to the client."""
    try:
        if os.path.exists(file_path):
            os.remove(file_path)
            logger.debug("Cleaned up temporary file %s", file_path)
    except OSError as e:
        logger.error("Error cleaning up temporary file %s: %s", file_path, e)
