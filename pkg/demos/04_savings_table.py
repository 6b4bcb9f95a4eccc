"""
Annotation time saved
=====================

Every correctly auto-labeled object saves the time a person would spend
drawing it, and that time depends on the shape complexity of its class.
"""

from labelprop.savings import RetrievalCounts, TimeModel, compute_savings, render_savings_table

# retrieved and ground-truth objects per complexity class for two venues
venues = {
    "Bonn": {"Simple": (2850, 4065), "Medium": (2425, 3203), "Complex": (179, 732)},
    "Kassel": {"Simple": (1581, 2230), "Medium": (1356, 1858), "Complex": (0, 144)},
}
reports = {name: compute_savings(RetrievalCounts(c)) for name, c in venues.items()}
print(render_savings_table(reports))

# a slower annotator makes the absolute savings grow; the share stays put
slow = TimeModel({"Simple": 4.54, "Medium": 4.88, "Complex": 5.64})
bonn = compute_savings(RetrievalCounts(venues["Bonn"]), slow)
print(f"\nBonn at half speed: {bonn.total_saved / 3600:.2f} h saved, {bonn.percent_saved:.1f}%")
